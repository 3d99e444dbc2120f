//! Field containers on both meshes, the rescaled strain operator, slice
//! averages, embeddings of one-dimensional states, and the residual
//! diagnostics that measure how close a 3D state is to a uniaxial one.
//!
//! All displacements are the dimensionless rescaled ones: transverse
//! components are measured in units of the radius, the axial component in
//! units of the length, so the aspect ratio `delta` enters the shear strains
//! as
//!   e13 = (delta * du1/dz + du3/dx / delta) / 2,
//!   e23 = (delta * du2/dz + du3/dy / delta) / 2.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, CompensatedSum};
use crate::mesh::{CylinderMesh, IntervalMesh};

/// Displacement and damage degrees of freedom on a cylinder mesh.
#[derive(Debug, Clone)]
pub struct Field3D {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub u3: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Aspect ratio in (0, 1]; stored on the field so one mesh serves a
    /// whole sweep.
    pub delta: f64,
}

impl Field3D {
    /// Admissible state with zero transverse displacement, affine axial
    /// displacement u3 = -eps_z z and no damage.
    pub fn axial_affine(mesh: &CylinderMesh, delta: f64, eps_z: f64) -> Self {
        let n = mesh.n_nodes();
        let mut u3 = vec![0.0; n];
        for i in 0..n {
            let (_, _, z) = mesh.node_coords(i);
            u3[i] = -eps_z * z;
        }
        Field3D {
            u1: vec![0.0; n],
            u2: vec![0.0; n],
            u3,
            alpha: vec![0.0; n],
            delta,
        }
    }

    /// The undamaged uniaxial minimizer: u1 = nu eps_z x, u2 = nu eps_z y,
    /// u3 = -eps_z z, alpha = 0.
    pub fn uniaxial_test(mesh: &CylinderMesh, delta: f64, eps_z: f64, nu: f64) -> Self {
        let n = mesh.n_nodes();
        let mut f = Field3D::axial_affine(mesh, delta, eps_z);
        for i in 0..n {
            let (x, y, _) = mesh.node_coords(i);
            f.u1[i] = nu * eps_z * x;
            f.u2[i] = nu * eps_z * y;
        }
        f
    }

    /// Checks sizes, finiteness, the box constraint on alpha, the axial
    /// Dirichlet data, and the range of delta.
    pub fn check_admissible(&self, mesh: &CylinderMesh, eps_z: f64) -> Result<()> {
        let n = mesh.n_nodes();
        for (name, v) in [
            ("u1", &self.u1),
            ("u2", &self.u2),
            ("u3", &self.u3),
            ("alpha", &self.alpha),
        ] {
            if v.len() != n {
                return Err(Error::Field(format!(
                    "{name} has {} entries, mesh has {n} nodes",
                    v.len()
                )));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(match name {
                    "u1" => "u1",
                    "u2" => "u2",
                    "u3" => "u3",
                    _ => "alpha",
                }));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Field(format!(
                "delta must lie in (0, 1] (got {})",
                self.delta
            )));
        }
        for a in &self.alpha {
            if !(0.0..=1.0).contains(a) {
                return Err(Error::Field(format!("alpha = {a} violates [0, 1]")));
            }
        }
        for i in mesh.z0_nodes() {
            if self.u3[i].abs() > 1e-12 {
                return Err(Error::Field(format!(
                    "u3 must vanish on z = 0 (node {i}: {})",
                    self.u3[i]
                )));
            }
        }
        for i in mesh.z1_nodes() {
            if (self.u3[i] + eps_z).abs() > 1e-12 * eps_z.abs().max(1.0) {
                return Err(Error::Field(format!(
                    "u3 must equal -eps_z on z = 1 (node {i}: {})",
                    self.u3[i]
                )));
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.u1.iter().all(|x| x.is_finite())
            && self.u2.iter().all(|x| x.is_finite())
            && self.u3.iter().all(|x| x.is_finite())
            && self.alpha.iter().all(|x| x.is_finite())
    }

    /// Clamps alpha into [0, 1]. Entries already in range are untouched.
    pub fn project_alpha(&mut self) {
        for a in &mut self.alpha {
            *a = a.clamp(0.0, 1.0);
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "delta": self.delta,
            "u1": self.u1,
            "u2": self.u2,
            "u3": self.u3,
            "alpha": self.alpha,
        })
    }
}

/// Axial profile state (u3bar, alphabar) on an interval mesh.
#[derive(Debug, Clone)]
pub struct Field1D {
    pub u3bar: Vec<f64>,
    pub alphabar: Vec<f64>,
}

impl Field1D {
    /// Affine axial profile u3bar = -eps_z z with constant damage.
    pub fn affine(mesh: &IntervalMesh, eps_z: f64, alpha: f64) -> Self {
        Field1D {
            u3bar: mesh.z.iter().map(|&z| -eps_z * z).collect(),
            alphabar: vec![alpha; mesh.n_nodes()],
        }
    }

    pub fn check_admissible(&self, mesh: &IntervalMesh, eps_z: f64) -> Result<()> {
        let n = mesh.n_nodes();
        if self.u3bar.len() != n || self.alphabar.len() != n {
            return Err(Error::Field(format!(
                "1d field sizes ({}, {}) do not match mesh nodes {n}",
                self.u3bar.len(),
                self.alphabar.len()
            )));
        }
        if !self
            .u3bar
            .iter()
            .chain(&self.alphabar)
            .all(|x| x.is_finite())
        {
            return Err(Error::NonFinite("field1d"));
        }
        if self.u3bar[0].abs() > 1e-12 {
            return Err(Error::Field(format!(
                "u3bar(0) must vanish (got {})",
                self.u3bar[0]
            )));
        }
        if (self.u3bar[n - 1] + eps_z).abs() > 1e-12 * eps_z.abs().max(1.0) {
            return Err(Error::Field(format!(
                "u3bar(1) must equal -eps_z (got {})",
                self.u3bar[n - 1]
            )));
        }
        for a in &self.alphabar {
            if !(0.0..=1.0).contains(a) {
                return Err(Error::Field(format!("alphabar = {a} violates [0, 1]")));
            }
        }
        Ok(())
    }

    /// Element slopes of u3bar (piecewise-constant derivative).
    pub fn slopes(&self, mesh: &IntervalMesh) -> Vec<f64> {
        (0..mesh.nz)
            .map(|e| (self.u3bar[e + 1] - self.u3bar[e]) / mesh.h)
            .collect()
    }

    /// Nodal derivative of u3bar: average of the adjacent element slopes,
    /// one-sided at the ends.
    pub fn nodal_slopes(&self, mesh: &IntervalMesh) -> Vec<f64> {
        let s = self.slopes(mesh);
        let n = mesh.n_nodes();
        let mut d = vec![0.0; n];
        d[0] = s[0];
        d[n - 1] = s[mesh.nz - 1];
        for k in 1..n - 1 {
            d[k] = 0.5 * (s[k - 1] + s[k]);
        }
        d
    }
}

/// Rescaled strain components at every Gauss point, cell-major then
/// point-major: entry `cell * 8 + g`.
#[derive(Debug, Clone)]
pub struct RescaledStrain {
    pub e11: Vec<f64>,
    pub e22: Vec<f64>,
    pub e33: Vec<f64>,
    pub e12: Vec<f64>,
    pub e13: Vec<f64>,
    pub e23: Vec<f64>,
}

/// Gradients of the four nodal fields at one Gauss point.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PointGradients {
    pub du1: [f64; 3],
    pub du2: [f64; 3],
    pub du3: [f64; 3],
    pub dalpha: [f64; 3],
    pub alpha: f64,
}

#[inline]
pub(crate) fn gradients_at(
    mesh: &CylinderMesh,
    f: &Field3D,
    nodes: &[usize; 8],
    g: usize,
) -> PointGradients {
    let mut out = PointGradients::default();
    let tab = &mesh.quad;
    for c in 0..8 {
        let id = nodes[c];
        let d = tab.dshape[g][c];
        let n = tab.shape[g][c];
        let (v1, v2, v3, a) = (f.u1[id], f.u2[id], f.u3[id], f.alpha[id]);
        for k in 0..3 {
            out.du1[k] += v1 * d[k];
            out.du2[k] += v2 * d[k];
            out.du3[k] += v3 * d[k];
            out.dalpha[k] += a * d[k];
        }
        out.alpha += a * n;
    }
    out
}

/// Rescaled strain of an admissible field, evaluated at every Gauss point.
pub fn strain(mesh: &CylinderMesh, f: &Field3D) -> RescaledStrain {
    let ncells = mesh.n_cells();
    let nq = ncells * 8;
    let mut s = RescaledStrain {
        e11: vec![0.0; nq],
        e22: vec![0.0; nq],
        e33: vec![0.0; nq],
        e12: vec![0.0; nq],
        e13: vec![0.0; nq],
        e23: vec![0.0; nq],
    };
    let delta = f.delta;
    let inv_delta = 1.0 / delta;
    for cell in 0..ncells {
        let nodes = mesh.cell_nodes(cell);
        for g in 0..8 {
            let p = gradients_at(mesh, f, &nodes, g);
            let q = cell * 8 + g;
            s.e11[q] = p.du1[0];
            s.e22[q] = p.du2[1];
            s.e33[q] = p.du3[2];
            s.e12[q] = 0.5 * (p.du1[1] + p.du2[0]);
            s.e13[q] = 0.5 * (delta * p.du1[2] + inv_delta * p.du3[0]);
            s.e23[q] = 0.5 * (delta * p.du2[2] + inv_delta * p.du3[1]);
        }
    }
    s
}

/// Which nodal scalar a slice average acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    U1,
    U2,
    U3,
    Alpha,
}

/// Cross-section average of a nodal field at every z level. Weights come
/// from the retained cells of the disk mask, so the discrete cross-section
/// area replaces pi.
pub fn slice_average(mesh: &CylinderMesh, f: &Field3D, which: Component) -> Vec<f64> {
    let data = match which {
        Component::U1 => &f.u1,
        Component::U2 => &f.u2,
        Component::U3 => &f.u3,
        Component::Alpha => &f.alpha,
    };
    slice_average_nodal(mesh, data)
}

/// Slice average of an arbitrary nodal array.
pub fn slice_average_nodal(mesh: &CylinderMesh, data: &[f64]) -> Vec<f64> {
    let n2 = mesh.n2d_nodes();
    let mut out = vec![0.0; mesh.nz + 1];
    for (level, item) in out.iter_mut().enumerate() {
        let mut acc = CompensatedSum::new();
        for j in 0..n2 {
            acc.add(mesh.node_weight2d[j] * data[level * n2 + j]);
        }
        *item = acc.value() / mesh.area2d;
    }
    out
}

/// Lifts a 1D state to the cylinder: u3 and alpha are constant on every
/// cross-section, u1 = u2 = 0. Requires matching axial resolutions.
pub fn embed_1d(
    g: &Field1D,
    delta: f64,
    mesh: &CylinderMesh,
    mesh1d: &IntervalMesh,
) -> Result<Field3D> {
    if mesh1d.nz != mesh.nz {
        return Err(Error::Field(format!(
            "axial resolutions differ: 1d nz = {}, 3d nz = {}",
            mesh1d.nz, mesh.nz
        )));
    }
    let n2 = mesh.n2d_nodes();
    let n = mesh.n_nodes();
    let mut f = Field3D {
        u1: vec![0.0; n],
        u2: vec![0.0; n],
        u3: vec![0.0; n],
        alpha: vec![0.0; n],
        delta,
    };
    for level in 0..=mesh.nz {
        for j in 0..n2 {
            f.u3[level * n2 + j] = g.u3bar[level];
            f.alpha[level * n2 + j] = g.alphabar[level];
        }
    }
    Ok(f)
}

/// Embedding with the matched transverse field u1 = -nu x u3bar'(z),
/// u2 = -nu y u3bar'(z); the structure the 3D minimizers approach.
pub fn embed_1d_with_transverse(
    g: &Field1D,
    delta: f64,
    mesh: &CylinderMesh,
    mesh1d: &IntervalMesh,
    nu: f64,
) -> Result<Field3D> {
    let mut f = embed_1d(g, delta, mesh, mesh1d)?;
    let slopes = g.nodal_slopes(mesh1d);
    let n2 = mesh.n2d_nodes();
    for level in 0..=mesh.nz {
        for j in 0..n2 {
            let (x, y) = mesh.node_xy[j];
            f.u1[level * n2 + j] = -nu * x * slopes[level];
            f.u2[level * n2 + j] = -nu * y * slopes[level];
        }
    }
    Ok(f)
}

/// Squared-residual integrals measuring the distance of a 3D state from the
/// uniaxial structure carried by a 1D reference. All integrals are plain
/// (unnormalized) over the discrete cylinder.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct DiagnosticsRecord {
    /// int |u3 - u3ref|^2
    pub u3: f64,
    /// int |d u3/dz - u3ref'|^2
    pub u3_z: f64,
    /// int |d u1/dx + nu u3ref'|^2
    pub poisson_x: f64,
    /// int |d u2/dy + nu u3ref'|^2
    pub poisson_y: f64,
    /// int (du1/dy + du2/dx)^2 + (delta du1/dz + du3/dx / delta)^2
    ///   + (delta du2/dz + du3/dy / delta)^2
    pub shear: f64,
    /// int |d alpha/dx|^2 + |d alpha/dy|^2
    pub alpha_transverse: f64,
    /// int |d alpha/dz - alphabar'|^2
    pub alpha_z: f64,
}

impl DiagnosticsRecord {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.u3,
            self.u3_z,
            self.poisson_x,
            self.poisson_y,
            self.shear,
            self.alpha_transverse,
            self.alpha_z,
        ]
    }

    pub fn max(&self) -> f64 {
        self.as_array().into_iter().fold(0.0, f64::max)
    }
}

/// Evaluates the residual integrals of `f` against the 1D reference `g`.
/// The reference u3bar and alphabar are interpolated linearly in z; their
/// derivatives are the element slopes. Axial resolutions must match.
pub fn uniaxial_limit_diagnostics(
    mesh: &CylinderMesh,
    mesh1d: &IntervalMesh,
    f: &Field3D,
    g: &Field1D,
    nu: f64,
) -> Result<DiagnosticsRecord> {
    if mesh1d.nz != mesh.nz {
        return Err(Error::Field(format!(
            "axial resolutions differ: 1d nz = {}, 3d nz = {}",
            mesh1d.nz, mesh.nz
        )));
    }
    let slopes = g.slopes(mesh1d);
    let alpha_slopes: Vec<f64> = (0..mesh1d.nz)
        .map(|e| (g.alphabar[e + 1] - g.alphabar[e]) / mesh1d.h)
        .collect();
    let ncells = mesh.n_cells();
    let nparts = exec::partition_count(ncells);
    let delta = f.delta;
    let inv_delta = 1.0 / delta;
    let w = mesh.quad.weight;

    let partials = exec::map_partitions(nparts, |p| {
        let mut acc = [CompensatedSum::new(); 7];
        for cell in exec::part_range(ncells, nparts, p) {
            let slab = mesh.cell_slab(cell);
            let nodes = mesh.cell_nodes(cell);
            let du3r = slopes[slab];
            let dar = alpha_slopes[slab];
            for gq in 0..8 {
                let pg = gradients_at(mesh, f, &nodes, gq);
                // u3 value at the Gauss point, and the reference there
                let mut u3v = 0.0;
                for c in 0..8 {
                    u3v += f.u3[nodes[c]] * mesh.quad.shape[gq][c];
                }
                let zq = mesh.z[slab] + mesh.quad.z_offset[gq];
                let s_loc = mesh1d.local(slab, zq);
                let u3r = g.u3bar[slab] * (1.0 - s_loc) + g.u3bar[slab + 1] * s_loc;

                let d0 = u3v - u3r;
                acc[0].add(w * d0 * d0);
                let d1 = pg.du3[2] - du3r;
                acc[1].add(w * d1 * d1);
                let d2 = pg.du1[0] + nu * du3r;
                acc[2].add(w * d2 * d2);
                let d3 = pg.du2[1] + nu * du3r;
                acc[3].add(w * d3 * d3);
                let g12 = pg.du1[1] + pg.du2[0];
                let g13 = delta * pg.du1[2] + inv_delta * pg.du3[0];
                let g23 = delta * pg.du2[2] + inv_delta * pg.du3[1];
                acc[4].add(w * (g12 * g12 + g13 * g13 + g23 * g23));
                acc[5].add(w * (pg.dalpha[0] * pg.dalpha[0] + pg.dalpha[1] * pg.dalpha[1]));
                let d6 = pg.dalpha[2] - dar;
                acc[6].add(w * d6 * d6);
            }
        }
        acc
    });

    let mut total = [CompensatedSum::new(); 7];
    for part in &partials {
        for k in 0..7 {
            total[k].merge(&part[k]);
        }
    }
    Ok(DiagnosticsRecord {
        u3: total[0].value(),
        u3_z: total[1].value(),
        poisson_x: total[2].value(),
        poisson_y: total[3].value(),
        shear: total[4].value(),
        alpha_transverse: total[5].value(),
        alpha_z: total[6].value(),
    })
}
