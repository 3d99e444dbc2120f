//! Alternate minimization of the damage energies: an exact linear solve for
//! the displacement at frozen damage, a box-constrained projected-gradient
//! solve for the damage at frozen displacement, and the outer loop.
//!
//! The 3D elastic operator is applied matrix-free over the voxel cells. Cells
//! are processed slab by slab in a fixed even/odd order, so parallel and
//! sequential runs produce bit-identical iterates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, CompensatedSum};
use crate::fields::{gradients_at, Field1D, Field3D};
use crate::material::{ConstitutiveLaw, MaterialParams};
use crate::mesh::{CylinderMesh, IntervalMesh};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverConfig {
    pub outer_max_iters: usize,
    /// Stop when the infinity norm of the damage update falls below this.
    pub outer_tol_alpha: f64,
    /// ... and the relative energy decrease falls below this.
    pub outer_tol_energy: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub pgd_tol: f64,
    pub pgd_max_iters: usize,
    pub seed: u64,
    /// Number of extra randomized starts (0 disables multistart).
    pub multistart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            outer_max_iters: 200,
            outer_tol_alpha: 1e-4,
            outer_tol_energy: 1e-10,
            cg_tol: 1e-8,
            cg_max_iters: 10_000,
            pgd_tol: 1e-8,
            pgd_max_iters: 50_000,
            seed: 0,
            multistart: 0,
        }
    }
}

impl SolverConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, val) in [
            ("solver.outer_tol_alpha", self.outer_tol_alpha),
            ("solver.outer_tol_energy", self.outer_tol_energy),
            ("solver.cg_tol", self.cg_tol),
            ("solver.pgd_tol", self.pgd_tol),
        ] {
            if !(val > 0.0) {
                v.push(format!("{name} must be > 0 (got {val})"));
            }
        }
        for (name, val) in [
            ("solver.outer_max_iters", self.outer_max_iters),
            ("solver.cg_max_iters", self.cg_max_iters),
            ("solver.pgd_max_iters", self.pgd_max_iters),
        ] {
            if val < 1 {
                v.push(format!("{name} must be at least 1 (got {val})"));
            }
        }
        v
    }
}

/// Outcome of an alternate-minimization run. The wall-clock time is kept for
/// console reporting but never serialized, so output files stay bit-identical
/// between repeated runs.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub outer_iterations: usize,
    pub energy: crate::energy::EnergyBreakdown,
    /// Energy after every half step (u-solve, then alpha-solve, per outer
    /// iteration), preceded by the initial energy.
    pub energy_trace: Vec<f64>,
    /// Infinity norm of the last damage update.
    pub alpha_update_inf: f64,
    pub cg_iterations: usize,
    pub pgd_iterations: usize,
    /// Spread of final energies across multistart runs, when enabled.
    pub multistart_spread: Option<f64>,
    #[serde(skip)]
    pub wallclock_s: f64,
}

// ---------------------------------------------------------------------------
// 3D elastic operator
// ---------------------------------------------------------------------------

struct ElasticCoefs<'a> {
    mu: f64,
    lambda: f64,
    delta: f64,
    inv_delta: f64,
    /// quad weight / measure
    scale: f64,
    /// degradation factor at every Gauss point, cell-major
    a_qp: &'a [f64],
}

/// Degradation factor at every Gauss point from the interpolated damage.
fn degradation_at_qp(mesh: &CylinderMesh, law: &ConstitutiveLaw, alpha: &[f64]) -> Vec<f64> {
    let ncells = mesh.n_cells();
    let mut a_qp = vec![0.0; ncells * 8];
    let eval = |cell: usize, out: &mut [f64]| {
        let nodes = mesh.cell_nodes(cell);
        for g in 0..8 {
            let mut av = 0.0;
            for c in 0..8 {
                av += alpha[nodes[c]] * mesh.quad.shape[g][c];
            }
            out[g] = law.degradation.value(av);
        }
    };
    #[cfg(feature = "parallel")]
    {
        if exec::parallel_enabled() {
            use rayon::prelude::*;
            a_qp.par_chunks_mut(8)
                .enumerate()
                .for_each(|(cell, out)| eval(cell, out));
            return a_qp;
        }
    }
    for cell in 0..ncells {
        eval(cell, &mut a_qp[cell * 8..cell * 8 + 8]);
    }
    a_qp
}

/// Undegraded elastic energy density at every Gauss point for a frozen
/// displacement; the damage subproblem only rescales it.
fn elastic_density_at_qp(mesh: &CylinderMesh, p: &MaterialParams, f: &Field3D) -> Vec<f64> {
    let ncells = mesh.n_cells();
    let mut psi = vec![0.0; ncells * 8];
    let (mu, lambda) = (p.mu, p.lambda);
    let delta = f.delta;
    let inv_delta = 1.0 / delta;
    let eval = |cell: usize, out: &mut [f64]| {
        let nodes = mesh.cell_nodes(cell);
        for g in 0..8 {
            let pg = gradients_at(mesh, f, &nodes, g);
            let (e11, e22, e33) = (pg.du1[0], pg.du2[1], pg.du3[2]);
            let tr = e11 + e22 + e33;
            let g12 = pg.du1[1] + pg.du2[0];
            let g13 = delta * pg.du1[2] + inv_delta * pg.du3[0];
            let g23 = delta * pg.du2[2] + inv_delta * pg.du3[1];
            out[g] = mu * (e11 * e11 + e22 * e22 + e33 * e33)
                + 0.5 * lambda * tr * tr
                + 0.5 * mu * (g12 * g12 + g13 * g13 + g23 * g23);
        }
    };
    #[cfg(feature = "parallel")]
    {
        if exec::parallel_enabled() {
            use rayon::prelude::*;
            psi.par_chunks_mut(8)
                .enumerate()
                .for_each(|(cell, out)| eval(cell, out));
            return psi;
        }
    }
    for cell in 0..ncells {
        eval(cell, &mut psi[cell * 8..cell * 8 + 8]);
    }
    psi
}

/// Adds the contribution of one slab of cells to the three output level
/// slices. `c1..c3` each cover the two node levels `slab` and `slab + 1`.
fn elastic_slab_kernel(
    mesh: &CylinderMesh,
    coefs: &ElasticCoefs,
    v: &[f64],
    slab: usize,
    c1: &mut [f64],
    c2: &mut [f64],
    c3: &mut [f64],
) {
    let n = mesh.n_nodes();
    let n2 = mesh.n2d_nodes();
    let (v1, v2, v3) = (&v[0..n], &v[n..2 * n], &v[2 * n..3 * n]);
    let n2c = mesh.n2d_cells();
    let base = slab * n2;
    for j in 0..n2c {
        let cell = slab * n2c + j;
        let nodes = mesh.cell_nodes(cell);
        for g in 0..8 {
            let a = coefs.a_qp[cell * 8 + g];
            let mut du1 = [0.0f64; 3];
            let mut du2 = [0.0f64; 3];
            let mut du3 = [0.0f64; 3];
            for c in 0..8 {
                let id = nodes[c];
                let d = mesh.quad.dshape[g][c];
                for k in 0..3 {
                    du1[k] += v1[id] * d[k];
                    du2[k] += v2[id] * d[k];
                    du3[k] += v3[id] * d[k];
                }
            }
            let (e11, e22, e33) = (du1[0], du2[1], du3[2]);
            let tr = e11 + e22 + e33;
            let g12 = du1[1] + du2[0];
            let g13 = coefs.delta * du1[2] + coefs.inv_delta * du3[0];
            let g23 = coefs.delta * du2[2] + coefs.inv_delta * du3[1];
            let s = coefs.scale * a;
            for c in 0..8 {
                let local = nodes[c] - base;
                let d = mesh.quad.dshape[g][c];
                c1[local] += s
                    * (2.0 * coefs.mu * e11 * d[0]
                        + coefs.lambda * tr * d[0]
                        + coefs.mu * g12 * d[1]
                        + coefs.mu * g13 * coefs.delta * d[2]);
                c2[local] += s
                    * (2.0 * coefs.mu * e22 * d[1]
                        + coefs.lambda * tr * d[1]
                        + coefs.mu * g12 * d[0]
                        + coefs.mu * g23 * coefs.delta * d[2]);
                c3[local] += s
                    * (2.0 * coefs.mu * e33 * d[2]
                        + coefs.lambda * tr * d[2]
                        + coefs.mu * g13 * coefs.inv_delta * d[0]
                        + coefs.mu * g23 * coefs.inv_delta * d[1]);
            }
        }
    }
}

/// y = K v, where K is the degraded elastic operator at frozen damage.
/// Two passes over slabs of equal parity write to disjoint node levels, so
/// the accumulation order is fixed regardless of the thread count.
fn elastic_apply(mesh: &CylinderMesh, coefs: &ElasticCoefs, v: &[f64], y: &mut [f64]) {
    let n = mesh.n_nodes();
    let n2 = mesh.n2d_nodes();
    y.fill(0.0);
    let (y1, rest) = y.split_at_mut(n);
    let (y2, y3) = rest.split_at_mut(n);
    type Chunks3<'a> = (usize, (&'a mut [f64], &'a mut [f64], &'a mut [f64]));
    for parity in 0..2usize {
        let off = parity * n2;
        let chunk = 2 * n2;
        let run = |args: Chunks3| {
            let (i, (c1, c2, c3)) = args;
            if c1.len() == chunk {
                let slab = 2 * i + parity;
                if slab < mesh.nz {
                    elastic_slab_kernel(mesh, coefs, v, slab, c1, c2, c3);
                }
            }
        };
        #[cfg(feature = "parallel")]
        {
            if exec::parallel_enabled() {
                use rayon::prelude::*;
                y1[off..]
                    .par_chunks_mut(chunk)
                    .zip(y2[off..].par_chunks_mut(chunk))
                    .zip(y3[off..].par_chunks_mut(chunk))
                    .map(|((a, b), c)| (a, b, c))
                    .enumerate()
                    .for_each(run);
                continue;
            }
        }
        y1[off..]
            .chunks_mut(chunk)
            .zip(y2[off..].chunks_mut(chunk))
            .zip(y3[off..].chunks_mut(chunk))
            .map(|((a, b), c)| (a, b, c))
            .enumerate()
            .for_each(run);
    }
}

/// Diagonal of K for Jacobi preconditioning.
fn elastic_diag(mesh: &CylinderMesh, coefs: &ElasticCoefs) -> Vec<f64> {
    let n = mesh.n_nodes();
    let mut diag = vec![0.0; 3 * n];
    for cell in 0..mesh.n_cells() {
        let nodes = mesh.cell_nodes(cell);
        for g in 0..8 {
            let a = coefs.a_qp[cell * 8 + g];
            let s = coefs.scale * a;
            for c in 0..8 {
                let id = nodes[c];
                let d = mesh.quad.dshape[g][c];
                let (dx2, dy2, dz2) = (d[0] * d[0], d[1] * d[1], d[2] * d[2]);
                diag[id] += s
                    * (2.0 * coefs.mu * dx2
                        + coefs.lambda * dx2
                        + coefs.mu * dy2
                        + coefs.mu * coefs.delta * coefs.delta * dz2);
                diag[n + id] += s
                    * (2.0 * coefs.mu * dy2
                        + coefs.lambda * dy2
                        + coefs.mu * dx2
                        + coefs.mu * coefs.delta * coefs.delta * dz2);
                diag[2 * n + id] += s
                    * (2.0 * coefs.mu * dz2
                        + coefs.lambda * dz2
                        + coefs.mu * coefs.inv_delta * coefs.inv_delta * (dx2 + dy2));
            }
        }
    }
    diag
}

/// Orthonormalized in-plane rigid motions: two translations and the
/// rotation (-y, x). They span the kernel of the elastic operator when only
/// u3 carries Dirichlet data; the solve pins their amplitudes to zero.
struct RigidModes {
    basis: Vec<Vec<f64>>,
}

impl RigidModes {
    fn build(mesh: &CylinderMesh) -> Self {
        let n = mesh.n_nodes();
        let n2 = mesh.n2d_nodes();
        let mut raw = vec![vec![0.0; 3 * n], vec![0.0; 3 * n], vec![0.0; 3 * n]];
        for i in 0..n {
            let (x, y) = mesh.node_xy[i % n2];
            raw[0][i] = 1.0;
            raw[1][n + i] = 1.0;
            raw[2][i] = -y;
            raw[2][n + i] = x;
        }
        // modified Gram-Schmidt
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for mut v in raw {
            for b in &basis {
                let c = exec::dot(&v, b);
                exec::axpy(&mut v, -c, b);
            }
            let nrm = exec::norm2(&v);
            if nrm > 1e-14 {
                for x in &mut v {
                    *x /= nrm;
                }
                basis.push(v);
            }
        }
        RigidModes { basis }
    }

    fn project_out(&self, v: &mut [f64]) {
        for b in &self.basis {
            let c = exec::dot(v, b);
            exec::axpy(v, -c, b);
        }
    }
}

fn mask_dirichlet_u3(mesh: &CylinderMesh, y: &mut [f64]) {
    let n = mesh.n_nodes();
    for i in mesh.z0_nodes() {
        y[2 * n + i] = 0.0;
    }
    for i in mesh.z1_nodes() {
        y[2 * n + i] = 0.0;
    }
}

#[derive(Debug)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Minimizes the quadratic elastic energy over the displacement at frozen
/// damage by preconditioned conjugate gradients. The transverse rigid
/// motions are projected out of the iterates, which fixes the gauge (zero
/// mean translation and rotation of the update). On success the field holds
/// the minimizer; on iteration-cap failure it holds the best iterate and an
/// error carries the residual.
pub fn solve_u_3d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &CylinderMesh,
    f: &mut Field3D,
    cfg: &SolverConfig,
) -> Result<CgStats> {
    let n = mesh.n_nodes();
    let a_qp = degradation_at_qp(mesh, law, &f.alpha);
    let coefs = ElasticCoefs {
        mu: p.mu,
        lambda: p.lambda,
        delta: f.delta,
        inv_delta: 1.0 / f.delta,
        scale: mesh.quad.weight / mesh.measure,
        a_qp: &a_qp,
    };
    let modes = RigidModes::build(mesh);

    let mut x = vec![0.0; 3 * n];
    x[0..n].copy_from_slice(&f.u1);
    x[n..2 * n].copy_from_slice(&f.u2);
    x[2 * n..3 * n].copy_from_slice(&f.u3);

    // gauge-fix the initial guess; the energy is blind to these modes
    modes.project_out(&mut x);

    let mut diag = elastic_diag(mesh, &coefs);
    mask_dirichlet_u3(mesh, &mut diag);
    for d in &mut diag {
        if *d <= 0.0 {
            *d = 1.0;
        }
    }

    let mut r = vec![0.0; 3 * n];
    elastic_apply(mesh, &coefs, &x, &mut r);
    for v in &mut r {
        *v = -*v;
    }
    mask_dirichlet_u3(mesh, &mut r);
    modes.project_out(&mut r);

    let r0_norm = exec::norm2(&r);
    let tol = cfg.cg_tol * (r0_norm + 1.0);

    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut pdir = z.clone();
    let mut rz = exec::dot(&r, &z);
    let mut q = vec![0.0; 3 * n];
    let mut res = r0_norm;
    let mut iters = 0;

    while res > tol && iters < cfg.cg_max_iters {
        elastic_apply(mesh, &coefs, &pdir, &mut q);
        mask_dirichlet_u3(mesh, &mut q);
        let pq = exec::dot(&pdir, &q);
        if pq <= 0.0 {
            break; // numerically singular direction; stop with best iterate
        }
        let alpha = rz / pq;
        exec::axpy(&mut x, alpha, &pdir);
        exec::axpy(&mut r, -alpha, &q);
        modes.project_out(&mut r);
        for i in 0..z.len() {
            z[i] = r[i] / diag[i];
        }
        let rz_new = exec::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..pdir.len() {
            pdir[i] = z[i] + beta * pdir[i];
        }
        res = exec::norm2(&r);
        iters += 1;
    }

    f.u1.copy_from_slice(&x[0..n]);
    f.u2.copy_from_slice(&x[n..2 * n]);
    // u3 Dirichlet entries were never touched: directions are masked there
    f.u3.copy_from_slice(&x[2 * n..3 * n]);

    if res > tol {
        return Err(Error::NonConvergence {
            solver: "cg",
            residual: res,
            iterations: iters,
        });
    }
    Ok(CgStats {
        iterations: iters,
        residual: res,
        converged: true,
    })
}

/// Exact tridiagonal solve of the 1D elastic subproblem at frozen damage.
pub fn solve_u_1d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &IntervalMesh,
    g: &mut Field1D,
) -> Result<CgStats> {
    let n = mesh.n_nodes();
    let e_mod = p.youngs_modulus();
    // element coefficients: E * mean degradation / h
    let mut coef = vec![0.0; mesh.nz];
    for e in 0..mesh.nz {
        let mut acc = 0.0;
        for (z, w) in mesh.gauss(e) {
            let s = mesh.local(e, z);
            let alpha = g.alphabar[e] * (1.0 - s) + g.alphabar[e + 1] * s;
            acc += w * law.degradation.value(alpha);
        }
        coef[e] = e_mod * acc / (mesh.h * mesh.h);
    }
    // interior unknowns 1..n-1 with Dirichlet lifting
    let m = n - 2;
    if m == 0 {
        return Ok(CgStats {
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let mut diag = vec![0.0; m];
    let mut lower = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for k in 0..m {
        let node = k + 1;
        diag[k] = coef[node - 1] + coef[node];
        if k > 0 {
            lower[k] = -coef[node - 1];
        }
    }
    rhs[0] += coef[0] * g.u3bar[0];
    rhs[m - 1] += coef[mesh.nz - 1] * g.u3bar[n - 1];
    // Thomas algorithm
    let mut c_star = vec![0.0; m];
    let mut d_star = vec![0.0; m];
    let upper = |k: usize| -coef[k + 1];
    c_star[0] = upper(0) / diag[0];
    d_star[0] = rhs[0] / diag[0];
    for k in 1..m {
        let denom = diag[k] - lower[k] * c_star[k - 1];
        if k < m - 1 {
            c_star[k] = upper(k) / denom;
        }
        d_star[k] = (rhs[k] - lower[k] * d_star[k - 1]) / denom;
    }
    let mut sol = vec![0.0; m];
    sol[m - 1] = d_star[m - 1];
    for k in (0..m - 1).rev() {
        sol[k] = d_star[k] - c_star[k] * sol[k + 1];
    }
    g.u3bar[1..=m].copy_from_slice(&sol);
    Ok(CgStats {
        iterations: 1,
        residual: 0.0,
        converged: true,
    })
}

// ---------------------------------------------------------------------------
// damage subproblem
// ---------------------------------------------------------------------------

/// Scalar coefficients of the damage subproblem.
struct AlphaCoefs {
    /// w1 (ell/L)^2, the full derivative factor of the gradient penalty
    w1_l2: f64,
    inv_d2: f64,
    /// quad weight / measure
    scale: f64,
}

/// Gradient of the damage subproblem objective at frozen displacement:
/// d/dalpha of  a(alpha) psi + w(alpha) + gradient penalty.
fn alpha_gradient_3d(
    mesh: &CylinderMesh,
    law: &ConstitutiveLaw,
    psi_qp: &[f64],
    alpha: &[f64],
    coefs: &AlphaCoefs,
    out: &mut [f64],
) {
    let AlphaCoefs {
        w1_l2,
        inv_d2,
        scale,
    } = *coefs;
    let n2 = mesh.n2d_nodes();
    out.fill(0.0);
    let slab_kernel = |slab: usize, chunk: &mut [f64]| {
        let n2c = mesh.n2d_cells();
        let base = slab * n2;
        for j in 0..n2c {
            let cell = slab * n2c + j;
            let nodes = mesh.cell_nodes(cell);
            for g in 0..8 {
                let mut av = 0.0;
                let mut da = [0.0f64; 3];
                for c in 0..8 {
                    let id = nodes[c];
                    av += alpha[id] * mesh.quad.shape[g][c];
                    let d = mesh.quad.dshape[g][c];
                    for k in 0..3 {
                        da[k] += alpha[id] * d[k];
                    }
                }
                let local_term =
                    law.degradation.deriv(av) * psi_qp[cell * 8 + g] + law.damage_energy.deriv(av);
                for c in 0..8 {
                    let local = nodes[c] - base;
                    let d = mesh.quad.dshape[g][c];
                    chunk[local] += scale
                        * (local_term * mesh.quad.shape[g][c]
                            + w1_l2 * (inv_d2 * (da[0] * d[0] + da[1] * d[1]) + da[2] * d[2]));
                }
            }
        }
    };
    for parity in 0..2usize {
        let off = parity * n2;
        let chunk = 2 * n2;
        let run = |(i, c): (usize, &mut [f64])| {
            if c.len() == chunk {
                let slab = 2 * i + parity;
                if slab < mesh.nz {
                    slab_kernel(slab, c);
                }
            }
        };
        #[cfg(feature = "parallel")]
        {
            if exec::parallel_enabled() {
                use rayon::prelude::*;
                out[off..].par_chunks_mut(chunk).enumerate().for_each(run);
                continue;
            }
        }
        out[off..].chunks_mut(chunk).enumerate().for_each(run);
    }
}

/// Objective of the damage subproblem (frozen displacement).
fn alpha_energy_3d(
    mesh: &CylinderMesh,
    law: &ConstitutiveLaw,
    psi_qp: &[f64],
    alpha: &[f64],
    coefs: &AlphaCoefs,
) -> f64 {
    let AlphaCoefs {
        w1_l2,
        inv_d2,
        scale,
    } = *coefs;
    let ncells = mesh.n_cells();
    let nparts = exec::partition_count(ncells);
    let partials = exec::map_partitions(nparts, |p| {
        let mut acc = CompensatedSum::new();
        for cell in exec::part_range(ncells, nparts, p) {
            let nodes = mesh.cell_nodes(cell);
            for g in 0..8 {
                let mut av = 0.0;
                let mut da = [0.0f64; 3];
                for c in 0..8 {
                    let id = nodes[c];
                    av += alpha[id] * mesh.quad.shape[g][c];
                    let d = mesh.quad.dshape[g][c];
                    for k in 0..3 {
                        da[k] += alpha[id] * d[k];
                    }
                }
                acc.add(
                    scale
                        * (law.degradation.value(av) * psi_qp[cell * 8 + g]
                            + law.damage_energy.value(av)
                            + 0.5
                                * w1_l2
                                * (inv_d2 * (da[0] * da[0] + da[1] * da[1]) + da[2] * da[2])),
                );
            }
        }
        acc
    });
    let mut total = CompensatedSum::new();
    for part in &partials {
        total.merge(part);
    }
    total.value()
}

#[derive(Debug)]
pub struct PgdStats {
    pub iterations: usize,
    pub projected_gradient_inf: f64,
    pub converged: bool,
}

/// Projected gradient with Barzilai-Borwein steps on the box [0,1]^n.
/// `energy` and `gradient` describe the smooth objective; the iterate with
/// the lowest energy seen is returned, so the outer energy trace cannot
/// increase.
fn pgd_box<E, G>(
    alpha: &mut [f64],
    energy: E,
    gradient: G,
    tol: f64,
    max_iters: usize,
) -> std::result::Result<PgdStats, (PgdStats, Vec<f64>)>
where
    E: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    let n = alpha.len();
    for a in alpha.iter_mut() {
        *a = a.clamp(0.0, 1.0);
    }
    let mut g = vec![0.0; n];
    let mut g_prev = vec![0.0; n];
    let mut a_prev = alpha.to_vec();
    gradient(alpha, &mut g);

    let pg_inf = |a: &[f64], g: &[f64]| {
        let mut m = 0.0f64;
        for i in 0..a.len() {
            let proj = (a[i] - g[i]).clamp(0.0, 1.0);
            m = m.max((a[i] - proj).abs());
        }
        m
    };

    let mut best = alpha.to_vec();
    let mut best_e = energy(alpha);
    let mut res = pg_inf(alpha, &g);
    if res <= tol {
        return Ok(PgdStats {
            iterations: 0,
            projected_gradient_inf: res,
            converged: true,
        });
    }

    // initial step from the curvature along the gradient direction
    let mut step = {
        let mut probe: Vec<f64> = alpha.iter().zip(&g).map(|(a, gi)| a - gi).collect();
        for v in &mut probe {
            *v = v.clamp(0.0, 1.0);
        }
        let mut gp = vec![0.0; n];
        gradient(&probe, &mut gp);
        let mut sy = 0.0;
        let mut ss = 0.0;
        for i in 0..n {
            let s = probe[i] - alpha[i];
            let y = gp[i] - g[i];
            sy += s * y;
            ss += s * s;
        }
        if sy > 0.0 && ss > 0.0 {
            ss / sy
        } else {
            1.0 / exec::norm_inf(&g).max(1e-30)
        }
    };

    let mut iters = 0;
    while iters < max_iters {
        a_prev.copy_from_slice(alpha);
        g_prev.copy_from_slice(&g);
        for i in 0..n {
            alpha[i] = (alpha[i] - step * g[i]).clamp(0.0, 1.0);
        }
        gradient(alpha, &mut g);
        iters += 1;

        let e = energy(alpha);
        if e < best_e {
            best_e = e;
            best.copy_from_slice(alpha);
        }

        res = pg_inf(alpha, &g);
        if res <= tol {
            // the final iterate satisfies the stationarity tolerance; at a
            // convex minimum its energy is below the start up to O(tol^2)
            return Ok(PgdStats {
                iterations: iters,
                projected_gradient_inf: res,
                converged: true,
            });
        }

        // BB1 step with safeguards
        let mut sy = 0.0;
        let mut ss = 0.0;
        for i in 0..n {
            let s = alpha[i] - a_prev[i];
            let y = g[i] - g_prev[i];
            sy += s * y;
            ss += s * s;
        }
        step = if sy > 0.0 && ss > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            step * 2.0
        };
    }
    let stats = PgdStats {
        iterations: iters,
        projected_gradient_inf: res,
        converged: false,
    };
    Err((stats, best))
}

/// Minimizes the damage subproblem of the 3D energy at frozen displacement.
pub fn solve_alpha_3d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &CylinderMesh,
    f: &mut Field3D,
    cfg: &SolverConfig,
) -> Result<PgdStats> {
    let psi_qp = elastic_density_at_qp(mesh, p, f);
    let coefs = AlphaCoefs {
        w1_l2: p.w1 * p.ell_ratio_sq(),
        inv_d2: 1.0 / (f.delta * f.delta),
        scale: mesh.quad.weight / mesh.measure,
    };
    let mut alpha = std::mem::take(&mut f.alpha);
    let result = pgd_box(
        &mut alpha,
        |a| alpha_energy_3d(mesh, law, &psi_qp, a, &coefs),
        |a, out| alpha_gradient_3d(mesh, law, &psi_qp, a, &coefs, out),
        cfg.pgd_tol,
        cfg.pgd_max_iters,
    );
    match result {
        Ok(stats) => {
            f.alpha = alpha;
            Ok(stats)
        }
        Err((stats, best)) => {
            f.alpha = best;
            Err(Error::NonConvergence {
                solver: "pgd",
                residual: stats.projected_gradient_inf,
                iterations: stats.iterations,
            })
        }
    }
}

/// Minimizes the damage subproblem of the 1D energy at frozen displacement.
pub fn solve_alpha_1d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &IntervalMesh,
    g: &mut Field1D,
    cfg: &SolverConfig,
) -> Result<PgdStats> {
    let e_mod = p.youngs_modulus();
    let w1_l2 = p.w1 * p.ell_ratio_sq();
    let nz = mesh.nz;
    // frozen elastic density per element
    let psi: Vec<f64> = (0..nz)
        .map(|e| {
            let du = (g.u3bar[e + 1] - g.u3bar[e]) / mesh.h;
            0.5 * e_mod * du * du
        })
        .collect();
    let h = mesh.h;
    let energy = |a: &[f64]| {
        let mut acc = CompensatedSum::new();
        for e in 0..nz {
            let da = (a[e + 1] - a[e]) / h;
            for (z, w) in mesh.gauss(e) {
                let s = mesh.local(e, z);
                let av = a[e] * (1.0 - s) + a[e + 1] * s;
                acc.add(
                    w * (law.degradation.value(av) * psi[e]
                        + law.damage_energy.value(av)
                        + 0.5 * w1_l2 * da * da),
                );
            }
        }
        acc.value()
    };
    let gradient = |a: &[f64], out: &mut [f64]| {
        out.fill(0.0);
        for e in 0..nz {
            let da = (a[e + 1] - a[e]) / h;
            for (z, w) in mesh.gauss(e) {
                let s = mesh.local(e, z);
                let av = a[e] * (1.0 - s) + a[e + 1] * s;
                let local = law.degradation.deriv(av) * psi[e] + law.damage_energy.deriv(av);
                let sh = [1.0 - s, s];
                let dn = [-1.0 / h, 1.0 / h];
                for k in 0..2 {
                    out[e + k] += w * (local * sh[k] + w1_l2 * da * dn[k]);
                }
            }
        }
    };
    let mut alpha = std::mem::take(&mut g.alphabar);
    let result = pgd_box(&mut alpha, energy, gradient, cfg.pgd_tol, cfg.pgd_max_iters);
    match result {
        Ok(stats) => {
            g.alphabar = alpha;
            Ok(stats)
        }
        Err((stats, best)) => {
            g.alphabar = best;
            Err(Error::NonConvergence {
                solver: "pgd",
                residual: stats.projected_gradient_inf,
                iterations: stats.iterations,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// alternate minimization
// ---------------------------------------------------------------------------

macro_rules! am_loop {
    ($cfg:expr, $alpha:expr, $solve_u:expr, $solve_a:expr, $eval:expr) => {{
        let cfg: &SolverConfig = $cfg;
        let started = std::time::Instant::now();
        let mut trace = Vec::new();
        let mut energy = $eval?;
        trace.push(energy.total);
        let mut alpha_prev: Vec<f64> = $alpha;

        let mut converged = false;
        let mut outer = 0;
        let mut cg_total = 0;
        let mut pgd_total = 0;
        let mut alpha_update = f64::INFINITY;
        let mut failed = false;

        while outer < cfg.outer_max_iters {
            outer += 1;
            match $solve_u {
                Ok(stats) => cg_total += stats.iterations,
                Err(_) => {
                    failed = true;
                    break;
                }
            }
            let e_u = $eval?;
            trace.push(e_u.total);
            match $solve_a {
                Ok(stats) => pgd_total += stats.iterations,
                Err(_) => {
                    failed = true;
                    break;
                }
            }
            let e_a = $eval?;
            trace.push(e_a.total);

            let alpha_now: Vec<f64> = $alpha;
            alpha_update = alpha_now
                .iter()
                .zip(&alpha_prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            alpha_prev = alpha_now;

            let decrease = (energy.total - e_a.total) / e_a.total.abs().max(1e-300);
            energy = e_a;
            if alpha_update < cfg.outer_tol_alpha && decrease < cfg.outer_tol_energy {
                converged = true;
                break;
            }
        }

        Ok(SolveReport {
            converged: converged && !failed,
            outer_iterations: outer,
            energy,
            energy_trace: trace,
            alpha_update_inf: alpha_update,
            cg_iterations: cg_total,
            pgd_iterations: pgd_total,
            multistart_spread: None,
            wallclock_s: started.elapsed().as_secs_f64(),
        })
    }};
}

/// Alternate minimization of the 3D energy starting from `f`. Converges to a
/// critical point; global minimality is not claimed. On an iteration cap or
/// inner-solver failure the report carries `converged = false` and the field
/// holds the best iterate reached.
pub fn alternate_minimize_3d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &CylinderMesh,
    f: &mut Field3D,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    f.check_admissible(mesh, p.eps_z)?;
    am_loop!(
        cfg,
        f.alpha.clone(),
        solve_u_3d(p, law, mesh, f, cfg),
        solve_alpha_3d(p, law, mesh, f, cfg),
        crate::energy::energy_3d(p, law, mesh, f)
    )
}

/// Alternate minimization of the 1D energy starting from `g`.
pub fn alternate_minimize_1d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &IntervalMesh,
    g: &mut Field1D,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    g.check_admissible(mesh, p.eps_z)?;
    am_loop!(
        cfg,
        g.alphabar.clone(),
        solve_u_1d(p, law, mesh, g),
        solve_alpha_1d(p, law, mesh, g, cfg),
        crate::energy::energy_1d(p, law, mesh, g)
    )
}

/// Multistart wrapper around the 1D alternate minimization: the default
/// start plus `cfg.multistart` seeded random damage initializations. Returns
/// the best state found and stamps the energy spread across starts into the
/// report.
pub fn alternate_minimize_1d_multistart(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &IntervalMesh,
    g: &mut Field1D,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let mut best = g.clone();
    let mut report = alternate_minimize_1d(p, law, mesh, &mut best, cfg)?;
    if cfg.multistart == 0 {
        *g = best;
        return Ok(report);
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let mut lo = report.energy.total;
    let mut hi = report.energy.total;
    for _ in 0..cfg.multistart {
        let mut trial = g.clone();
        let level = rng.next_f64();
        for a in trial.alphabar.iter_mut() {
            *a = (level + 0.2 * (rng.next_f64() - 0.5)).clamp(0.0, 1.0);
        }
        let r = alternate_minimize_1d(p, law, mesh, &mut trial, cfg)?;
        lo = lo.min(r.energy.total);
        hi = hi.max(r.energy.total);
        if r.energy.total < report.energy.total {
            best = trial;
            report = r;
        }
    }
    report.multistart_spread = Some(hi - lo);
    *g = best;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{energy_1d, energy_3d};
    use crate::material::at1_threshold_strain;
    use crate::mesh::{build_cylinder, build_interval};

    fn params(eps_z: f64) -> MaterialParams {
        MaterialParams {
            lambda: 1.0,
            mu: 1.0,
            eta: 0.1,
            w1: 1.0,
            ell: 0.2,
            rod_length: 1.0,
            eps_z,
        }
    }

    #[test]
    fn elastic_solve_reaches_the_uniaxial_energy() {
        let p = params(0.4);
        let law = ConstitutiveLaw::standard(&p, false);
        let mesh = build_cylinder(8, 4).unwrap();
        let cfg = SolverConfig::default();
        // start away from the minimizer
        let mut f = Field3D::axial_affine(&mesh, 0.5, p.eps_z);
        let stats = solve_u_3d(&p, &law, &mesh, &mut f, &cfg).unwrap();
        assert!(stats.converged);
        let b = energy_3d(&p, &law, &mesh, &f).unwrap();
        let bound = 0.5 * p.youngs_modulus() * p.eps_z * p.eps_z;
        assert!(
            b.total <= bound + 1e-10 * bound,
            "energy {} above the uniaxial bound {bound}",
            b.total
        );
    }

    #[test]
    fn elastic_solve_gradient_norm_meets_tolerance() {
        let p = params(0.4);
        let law = ConstitutiveLaw::standard(&p, false);
        let mesh = build_cylinder(6, 4).unwrap();
        let cfg = SolverConfig::default();
        let mut f = Field3D::axial_affine(&mesh, 0.5, p.eps_z);
        solve_u_3d(&p, &law, &mesh, &mut f, &cfg).unwrap();
        let grad = crate::energy::grad_energy_3d(&p, &law, &mesh, &f).unwrap();
        // the u-block gradient, after removing the rigid components, is small
        let n = mesh.n_nodes();
        let mut v = vec![0.0; 3 * n];
        v[0..n].copy_from_slice(&grad.u1);
        v[n..2 * n].copy_from_slice(&grad.u2);
        v[2 * n..3 * n].copy_from_slice(&grad.u3);
        let modes = RigidModes::build(&mesh);
        modes.project_out(&mut v);
        assert!(exec::norm2(&v) < 1e-6);
    }

    #[test]
    fn one_d_elastic_solve_is_exactly_affine() {
        let p = params(0.7);
        let law = ConstitutiveLaw::standard(&p, false);
        let mesh = build_interval(9).unwrap();
        let mut g = Field1D::affine(&mesh, p.eps_z, 0.0);
        // perturb the interior, keep ends
        for k in 1..mesh.nz {
            g.u3bar[k] += 0.1 * (k as f64).sin();
        }
        solve_u_1d(&p, &law, &mesh, &mut g).unwrap();
        for (k, &z) in mesh.z.iter().enumerate() {
            assert!(
                (g.u3bar[k] + p.eps_z * z).abs() < 1e-12,
                "node {k}: {}",
                g.u3bar[k]
            );
        }
    }

    #[test]
    fn constant_degradation_does_not_move_the_minimizer() {
        // a constant factor scales the quadratic form; the argmin is shared
        let p = params(0.5);
        let law = ConstitutiveLaw::standard(&p, false);
        let mesh = build_cylinder(6, 4).unwrap();
        let cfg = SolverConfig {
            cg_tol: 1e-12,
            ..SolverConfig::default()
        };
        let mut f0 = Field3D::axial_affine(&mesh, 0.5, p.eps_z);
        solve_u_3d(&p, &law, &mesh, &mut f0, &cfg).unwrap();
        let mut f1 = Field3D::axial_affine(&mesh, 0.5, p.eps_z);
        f1.alpha.fill(1.0);
        solve_u_3d(&p, &law, &mesh, &mut f1, &cfg).unwrap();
        let du: f64 = f0
            .u1
            .iter()
            .zip(&f1.u1)
            .chain(f0.u2.iter().zip(&f1.u2))
            .chain(f0.u3.iter().zip(&f1.u3))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(du < 1e-6, "minimizers differ by {du}");
    }

    #[test]
    fn damage_stays_zero_without_strain() {
        let p = params(0.0);
        let mesh = build_interval(12).unwrap();
        let cfg = SolverConfig::default();
        for at1 in [true, false] {
            let law = ConstitutiveLaw::standard(&p, at1);
            let mut g = Field1D::affine(&mesh, 0.0, 0.0);
            solve_alpha_1d(&p, &law, &mesh, &mut g, &cfg).unwrap();
            assert!(g.alphabar.iter().all(|&a| a.abs() < 1e-12));
        }
    }

    #[test]
    fn at1_below_threshold_keeps_alpha_zero() {
        let p = params(0.0);
        let eps_c = at1_threshold_strain(&p);
        let p = params(0.9 * eps_c);
        let law = ConstitutiveLaw::standard(&p, true);
        let mesh = build_interval(24).unwrap();
        let cfg = SolverConfig::default();
        let mut g = Field1D::affine(&mesh, p.eps_z, 0.0);
        let report = alternate_minimize_1d(&p, &law, &mesh, &mut g, &cfg).unwrap();
        assert!(report.converged);
        assert!(report.outer_iterations <= 2);
        assert!(g.alphabar.iter().all(|&a| a <= 1e-8));
        // elastic energy of the undamaged affine state
        let expected = 0.5 * p.youngs_modulus() * p.eps_z * p.eps_z;
        assert!((report.energy.total - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn at1_above_threshold_nucleates_damage() {
        let base = params(0.0);
        let eps_c = at1_threshold_strain(&base);
        let p = params(1.1 * eps_c);
        let law = ConstitutiveLaw::standard(&p, true);
        let mesh = build_interval(24).unwrap();
        let cfg = SolverConfig::default();
        let mut g = Field1D::affine(&mesh, p.eps_z, 0.0);
        alternate_minimize_1d(&p, &law, &mesh, &mut g, &cfg).unwrap();
        assert!(g.alphabar.iter().any(|&a| a > 1e-4));
    }

    #[test]
    fn at2_homogeneous_solution_matches_pointwise_minimizer() {
        let p = params(1.0);
        let law = ConstitutiveLaw::standard(&p, false);
        let mesh = build_interval(32).unwrap();
        let cfg = SolverConfig::default();
        let mut g = Field1D::affine(&mesh, p.eps_z, 0.0);
        let report = alternate_minimize_1d(&p, &law, &mesh, &mut g, &cfg).unwrap();
        assert!(report.converged);
        // closed form: alpha* = s / (1 + s) with s = (1-eta) E eps^2 / (2 w1)
        let s = (1.0 - p.eta) * p.youngs_modulus() * p.eps_z * p.eps_z / (2.0 * p.w1);
        let alpha_star = s / (1.0 + s);
        for &a in &g.alphabar {
            assert!((a - alpha_star).abs() < 1e-6, "{a} vs {alpha_star}");
        }
    }

    #[test]
    fn zero_load_gives_zero_state() {
        let p = params(0.0);
        let law = ConstitutiveLaw::standard(&p, false);
        let mesh = build_cylinder(6, 3).unwrap();
        let cfg = SolverConfig::default();
        let mut f = Field3D::axial_affine(&mesh, 0.5, 0.0);
        let report = alternate_minimize_3d(&p, &law, &mesh, &mut f, &cfg).unwrap();
        assert!(report.converged);
        assert!(report.energy.total.abs() < 1e-14);
        assert!(f.alpha.iter().all(|&a| a < 1e-10));
    }

    #[test]
    fn energy_trace_is_monotone() {
        let p = params(1.2);
        let law = ConstitutiveLaw::standard(&p, false);
        let mesh = build_cylinder(6, 4).unwrap();
        let cfg = SolverConfig::default();
        let nu = p.poisson_ratio();
        let mut f = Field3D::uniaxial_test(&mesh, 0.4, p.eps_z, nu);
        let report = alternate_minimize_3d(&p, &law, &mesh, &mut f, &cfg).unwrap();
        for w in report.energy_trace.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12) + 1e-14,
                "trace increased: {} -> {}",
                w[0],
                w[1]
            );
        }
        // box holds after the final damage solve
        assert!(f.alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
    }

    #[test]
    fn minimal_energy_scales_with_common_modulus_factor() {
        let p = params(1.0);
        let law = ConstitutiveLaw::standard(&p, false);
        let mesh = build_interval(16).unwrap();
        let cfg = SolverConfig {
            pgd_tol: 1e-10,
            ..SolverConfig::default()
        };
        let mut g = Field1D::affine(&mesh, p.eps_z, 0.0);
        let r = alternate_minimize_1d(&p, &law, &mesh, &mut g, &cfg).unwrap();

        let c = 3.7;
        let ps = MaterialParams {
            lambda: c * p.lambda,
            mu: c * p.mu,
            w1: c * p.w1,
            ..p
        };
        let laws = ConstitutiveLaw::standard(&ps, false);
        let mut gs = Field1D::affine(&mesh, p.eps_z, 0.0);
        let rs = alternate_minimize_1d(&ps, &laws, &mesh, &mut gs, &cfg).unwrap();

        assert!((rs.energy.total - c * r.energy.total).abs() < 1e-8 * rs.energy.total);
        let diff: f64 = g
            .alphabar
            .iter()
            .zip(&gs.alphabar)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "fields differ by {diff}");
    }

    #[test]
    fn coarse_3d_at_delta_one_agrees_with_1d() {
        // elastic regime: both relax to the uniaxial state
        let p = params(0.5);
        let law = ConstitutiveLaw::standard(&p, true);
        let mesh = build_cylinder(8, 4).unwrap();
        let m1 = build_interval(4).unwrap();
        let cfg = SolverConfig::default();
        let nu = p.poisson_ratio();
        let mut f = Field3D::uniaxial_test(&mesh, 1.0, p.eps_z, nu);
        let r3 = alternate_minimize_3d(&p, &law, &mesh, &mut f, &cfg).unwrap();
        let mut g = Field1D::affine(&m1, p.eps_z, 0.0);
        let r1 = alternate_minimize_1d(&p, &law, &m1, &mut g, &cfg).unwrap();
        assert!((r3.energy.total - r1.energy.total).abs() < 1e-10 * r1.energy.total);
    }

    #[test]
    fn starved_damage_solve_errors_and_keeps_the_best_iterate() {
        let p = params(1.5);
        let law = ConstitutiveLaw::standard(&p, false);
        let mesh = build_interval(16).unwrap();
        let cfg = SolverConfig {
            pgd_max_iters: 1,
            pgd_tol: 1e-14,
            ..SolverConfig::default()
        };
        let mut g = Field1D::affine(&mesh, p.eps_z, 0.0);
        let e0 = energy_1d(&p, &law, &mesh, &g).unwrap().total;
        let err = solve_alpha_1d(&p, &law, &mesh, &mut g, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { solver: "pgd", .. }));
        // the field holds the best iterate: in the box and no worse in energy
        assert!(g.alphabar.iter().all(|a| (0.0..=1.0).contains(a)));
        let e1 = energy_1d(&p, &law, &mesh, &g).unwrap().total;
        assert!(e1 <= e0 * (1.0 + 1e-12));
    }

    #[test]
    fn tension_mirrors_compression() {
        // eps_z < 0 is a rod in tension; the energy only sees the square of
        // the strain, so the minimized energies coincide
        let pc = params(1.0);
        let pt = params(-1.0);
        let law_c = ConstitutiveLaw::standard(&pc, false);
        let law_t = ConstitutiveLaw::standard(&pt, false);
        let mesh = build_interval(16).unwrap();
        let cfg = SolverConfig::default();
        let mut gc = Field1D::affine(&mesh, pc.eps_z, 0.0);
        let rc = alternate_minimize_1d(&pc, &law_c, &mesh, &mut gc, &cfg).unwrap();
        let mut gt = Field1D::affine(&mesh, pt.eps_z, 0.0);
        let rt = alternate_minimize_1d(&pt, &law_t, &mesh, &mut gt, &cfg).unwrap();
        assert!((rc.energy.total - rt.energy.total).abs() < 1e-12 * rc.energy.total);
        for k in 0..mesh.n_nodes() {
            assert!((gc.u3bar[k] + gt.u3bar[k]).abs() < 1e-10);
            assert!((gc.alphabar[k] - gt.alphabar[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn multistart_reports_spread() {
        let p = params(1.5);
        let law = ConstitutiveLaw::standard(&p, true);
        let mesh = build_interval(20).unwrap();
        let cfg = SolverConfig {
            multistart: 2,
            seed: 11,
            ..SolverConfig::default()
        };
        let mut g = Field1D::affine(&mesh, p.eps_z, 0.0);
        let r = alternate_minimize_1d_multistart(&p, &law, &mesh, &mut g, &cfg).unwrap();
        assert!(r.multistart_spread.is_some());
        energy_1d(&p, &law, &mesh, &g).unwrap();
    }
}
