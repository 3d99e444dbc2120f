//! Evaluation of the rescaled 3D energy per unit volume, its 1D limit, and
//! their exact discrete gradients.
//!
//! The 3D integrand, per quadrature point, is
//!
//!   a(alpha) [ mu (e11^2 + e22^2 + e33^2) + lambda/2 (tr e)^2
//!              + mu/2 (g12^2 + g13^2 + g23^2) ]
//!   + w(alpha) + w1/2 (ell/L)^2 [ (ax^2 + ay^2)/delta^2 + az^2 ]
//!
//! with g12 = du1/dy + du2/dx, g13 = delta du1/dz + du3/dx / delta,
//! g23 = delta du2/dz + du3/dy / delta, and (ax, ay, az) the damage gradient.
//! All integrals are normalized by the discrete volume of the mesh so that
//! constant-integrand identities hold exactly on the stair-step boundary.
//!
//! The 1D limit integrand is
//!   a(alphabar) E/2 |u3bar'|^2 + w(alphabar) + w1/2 (ell/L)^2 |alphabar'|^2.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, CompensatedSum};
use crate::fields::{gradients_at, Field1D, Field3D};
use crate::material::{ConstitutiveLaw, MaterialParams};
use crate::mesh::{CylinderMesh, IntervalMesh};

/// Per-term energy values. Components follow the grouping of the integrand;
/// `total` is their exact sum.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct EnergyBreakdown {
    /// a mu (e11^2 + e22^2 + e33^2); in 1D, a E/2 |u3bar'|^2.
    pub normal: f64,
    /// a lambda/2 (tr e)^2.
    pub trace: f64,
    /// a mu/2 (du1/dy + du2/dx)^2.
    pub shear_inplane: f64,
    /// a mu/2 of the two delta-scaled shear combinations.
    pub shear_axial: f64,
    /// w(alpha).
    pub damage_local: f64,
    /// w1/2 (ell/L)^2 (|d alpha/dx|^2 + |d alpha/dy|^2) / delta^2.
    pub damage_grad_transverse: f64,
    /// w1/2 (ell/L)^2 |d alpha/dz|^2.
    pub damage_grad_axial: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn finish(parts: [f64; 7]) -> Self {
        let total = parts.iter().sum();
        EnergyBreakdown {
            normal: parts[0],
            trace: parts[1],
            shear_inplane: parts[2],
            shear_axial: parts[3],
            damage_local: parts[4],
            damage_grad_transverse: parts[5],
            damage_grad_axial: parts[6],
            total,
        }
    }

    pub fn elastic(&self) -> f64 {
        self.normal + self.trace + self.shear_inplane + self.shear_axial
    }

    pub fn damage(&self) -> f64 {
        self.damage_local + self.damage_grad_transverse + self.damage_grad_axial
    }

    /// CSV header matching `csv_row`.
    pub fn csv_header() -> &'static str {
        "normal,trace,shear_inplane,shear_axial,damage_local,damage_grad_transverse,damage_grad_axial,total"
    }

    pub fn csv_row(&self) -> String {
        [
            self.normal,
            self.trace,
            self.shear_inplane,
            self.shear_axial,
            self.damage_local,
            self.damage_grad_transverse,
            self.damage_grad_axial,
            self.total,
        ]
        .map(crate::io::fmt_f64)
        .join(",")
    }
}

fn require_finite_3d(f: &Field3D) -> Result<()> {
    if !f.all_finite() {
        return Err(Error::NonFinite("field3d"));
    }
    Ok(())
}

/// Energy of a 3D state, normalized by the discrete volume.
pub fn energy_3d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &CylinderMesh,
    f: &Field3D,
) -> Result<EnergyBreakdown> {
    require_finite_3d(f)?;
    if f.delta <= 0.0 {
        return Err(Error::Field(format!(
            "delta must be positive (got {})",
            f.delta
        )));
    }
    let ncells = mesh.n_cells();
    let nparts = exec::partition_count(ncells);
    let (mu, lambda) = (p.mu, p.lambda);
    let w1_l2 = 0.5 * p.w1 * p.ell_ratio_sq();
    let delta = f.delta;
    let inv_delta = 1.0 / delta;
    let inv_d2 = 1.0 / (delta * delta);
    let w = mesh.quad.weight;

    let partials = exec::map_partitions(nparts, |part| {
        let mut acc = [CompensatedSum::new(); 7];
        for cell in exec::part_range(ncells, nparts, part) {
            let nodes = mesh.cell_nodes(cell);
            for g in 0..8 {
                let pg = gradients_at(mesh, f, &nodes, g);
                let a = law.degradation.value(pg.alpha);
                let (e11, e22, e33) = (pg.du1[0], pg.du2[1], pg.du3[2]);
                let tr = e11 + e22 + e33;
                let g12 = pg.du1[1] + pg.du2[0];
                let g13 = delta * pg.du1[2] + inv_delta * pg.du3[0];
                let g23 = delta * pg.du2[2] + inv_delta * pg.du3[1];
                acc[0].add(w * a * mu * (e11 * e11 + e22 * e22 + e33 * e33));
                acc[1].add(w * a * 0.5 * lambda * tr * tr);
                acc[2].add(w * a * 0.5 * mu * g12 * g12);
                acc[3].add(w * a * 0.5 * mu * (g13 * g13 + g23 * g23));
                acc[4].add(w * law.damage_energy.value(pg.alpha));
                acc[5].add(
                    w * w1_l2
                        * inv_d2
                        * (pg.dalpha[0] * pg.dalpha[0] + pg.dalpha[1] * pg.dalpha[1]),
                );
                acc[6].add(w * w1_l2 * pg.dalpha[2] * pg.dalpha[2]);
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
    let inv_measure = 1.0 / mesh.measure;
    Ok(EnergyBreakdown::finish(
        total.map(|a| a.value() * inv_measure),
    ))
}

/// Energy of a 1D state over (0, 1).
pub fn energy_1d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &IntervalMesh,
    g: &Field1D,
) -> Result<EnergyBreakdown> {
    if !g.u3bar.iter().chain(&g.alphabar).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("field1d"));
    }
    let e_mod = p.youngs_modulus();
    let w1_l2 = 0.5 * p.w1 * p.ell_ratio_sq();
    let mut elastic = CompensatedSum::new();
    let mut local = CompensatedSum::new();
    let mut grad = CompensatedSum::new();
    for e in 0..mesh.nz {
        let du = (g.u3bar[e + 1] - g.u3bar[e]) / mesh.h;
        let da = (g.alphabar[e + 1] - g.alphabar[e]) / mesh.h;
        for (z, w) in mesh.gauss(e) {
            let s = mesh.local(e, z);
            let alpha = g.alphabar[e] * (1.0 - s) + g.alphabar[e + 1] * s;
            elastic.add(w * law.degradation.value(alpha) * 0.5 * e_mod * du * du);
            local.add(w * law.damage_energy.value(alpha));
            grad.add(w * w1_l2 * da * da);
        }
    }
    Ok(EnergyBreakdown::finish([
        elastic.value(),
        0.0,
        0.0,
        0.0,
        local.value(),
        0.0,
        grad.value(),
    ]))
}

/// Gradient of the discrete 3D energy with respect to every degree of
/// freedom. Axial Dirichlet entries of the u3 block are masked to zero; the
/// alpha block is the plain partial derivative, reported before any box
/// projection.
#[derive(Debug, Clone)]
pub struct Gradient3D {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub u3: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Assembles the gradient of `energy_3d` at `f`.
pub fn grad_energy_3d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &CylinderMesh,
    f: &Field3D,
) -> Result<Gradient3D> {
    require_finite_3d(f)?;
    let n = mesh.n_nodes();
    let ncells = mesh.n_cells();
    let nparts = exec::partition_count(ncells);
    let (mu, lambda) = (p.mu, p.lambda);
    let w1_l2 = p.w1 * p.ell_ratio_sq(); // note: derivative of the 1/2-term
    let delta = f.delta;
    let inv_delta = 1.0 / delta;
    let inv_d2 = 1.0 / (delta * delta);
    let scale = mesh.quad.weight / mesh.measure;

    let partials = exec::map_partitions(nparts, |part| {
        let mut g1 = vec![0.0; n];
        let mut g2 = vec![0.0; n];
        let mut g3 = vec![0.0; n];
        let mut ga = vec![0.0; n];
        for cell in exec::part_range(ncells, nparts, part) {
            let nodes = mesh.cell_nodes(cell);
            for g in 0..8 {
                let pg = gradients_at(mesh, f, &nodes, g);
                let a = law.degradation.value(pg.alpha);
                let da = law.degradation.deriv(pg.alpha);
                let dw = law.damage_energy.deriv(pg.alpha);
                let (e11, e22, e33) = (pg.du1[0], pg.du2[1], pg.du3[2]);
                let tr = e11 + e22 + e33;
                let g12 = pg.du1[1] + pg.du2[0];
                let g13 = delta * pg.du1[2] + inv_delta * pg.du3[0];
                let g23 = delta * pg.du2[2] + inv_delta * pg.du3[1];
                // elastic density without the degradation factor, reused by
                // the alpha derivative
                let psi = mu * (e11 * e11 + e22 * e22 + e33 * e33)
                    + 0.5 * lambda * tr * tr
                    + 0.5 * mu * (g12 * g12 + g13 * g13 + g23 * g23);
                for c in 0..8 {
                    let id = nodes[c];
                    let d = mesh.quad.dshape[g][c];
                    let nsh = mesh.quad.shape[g][c];
                    g1[id] += scale
                        * a
                        * (2.0 * mu * e11 * d[0]
                            + lambda * tr * d[0]
                            + mu * g12 * d[1]
                            + mu * g13 * delta * d[2]);
                    g2[id] += scale
                        * a
                        * (2.0 * mu * e22 * d[1]
                            + lambda * tr * d[1]
                            + mu * g12 * d[0]
                            + mu * g23 * delta * d[2]);
                    g3[id] += scale
                        * a
                        * (2.0 * mu * e33 * d[2]
                            + lambda * tr * d[2]
                            + mu * g13 * inv_delta * d[0]
                            + mu * g23 * inv_delta * d[1]);
                    ga[id] += scale
                        * ((da * psi + dw) * nsh
                            + w1_l2
                                * (inv_d2 * (pg.dalpha[0] * d[0] + pg.dalpha[1] * d[1])
                                    + pg.dalpha[2] * d[2]));
                }
            }
        }
        (g1, g2, g3, ga)
    });

    let mut out = Gradient3D {
        u1: vec![0.0; n],
        u2: vec![0.0; n],
        u3: vec![0.0; n],
        alpha: vec![0.0; n],
    };
    for (g1, g2, g3, ga) in &partials {
        for i in 0..n {
            out.u1[i] += g1[i];
            out.u2[i] += g2[i];
            out.u3[i] += g3[i];
            out.alpha[i] += ga[i];
        }
    }
    for i in mesh.z0_nodes() {
        out.u3[i] = 0.0;
    }
    for i in mesh.z1_nodes() {
        out.u3[i] = 0.0;
    }
    Ok(out)
}

/// Gradient of the discrete 1D energy; Dirichlet entries of u3bar are masked.
#[derive(Debug, Clone)]
pub struct Gradient1D {
    pub u3bar: Vec<f64>,
    pub alphabar: Vec<f64>,
}

pub fn grad_energy_1d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &IntervalMesh,
    g: &Field1D,
) -> Result<Gradient1D> {
    if !g.u3bar.iter().chain(&g.alphabar).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("field1d"));
    }
    let n = mesh.n_nodes();
    let e_mod = p.youngs_modulus();
    let w1_l2 = p.w1 * p.ell_ratio_sq();
    let mut gu = vec![0.0; n];
    let mut ga = vec![0.0; n];
    for e in 0..mesh.nz {
        let du = (g.u3bar[e + 1] - g.u3bar[e]) / mesh.h;
        let dalpha = (g.alphabar[e + 1] - g.alphabar[e]) / mesh.h;
        for (z, w) in mesh.gauss(e) {
            let s = mesh.local(e, z);
            let alpha = g.alphabar[e] * (1.0 - s) + g.alphabar[e + 1] * s;
            let a = law.degradation.value(alpha);
            let da = law.degradation.deriv(alpha);
            let dw = law.damage_energy.deriv(alpha);
            let psi = 0.5 * e_mod * du * du;
            // shape derivatives of the two linear basis functions
            let dn = [-1.0 / mesh.h, 1.0 / mesh.h];
            let sh = [1.0 - s, s];
            for (k, node) in [e, e + 1].into_iter().enumerate() {
                gu[node] += w * a * e_mod * du * dn[k];
                ga[node] += w * ((da * psi + dw) * sh[k] + w1_l2 * dalpha * dn[k]);
            }
        }
    }
    gu[0] = 0.0;
    gu[n - 1] = 0.0;
    Ok(Gradient1D {
        u3bar: gu,
        alphabar: ga,
    })
}
