//! Dimension-reduction study harness: sweep the aspect ratio toward zero,
//! minimize the 3D energy, compare against the 1D minimizer, and evaluate
//! the residual and remainder quantities that quantify convergence to the
//! uniaxial limit.

use serde::Serialize;

use crate::energy::energy_3d;
use crate::error::{Error, Result};
use crate::exec::CompensatedSum;
use crate::fields::{
    embed_1d_with_transverse, gradients_at, uniaxial_limit_diagnostics, DiagnosticsRecord, Field1D,
    Field3D,
};
use crate::material::{ConstitutiveLaw, MaterialParams};
use crate::mesh::{build_cylinder, build_interval, CylinderMesh, IntervalMesh};
use crate::solver::{
    alternate_minimize_1d, alternate_minimize_1d_multistart, alternate_minimize_3d, SolveReport,
    SolverConfig,
};

/// Exhaustive scan of the pointwise energy
///   a(alpha) E/2 eps^2 + w(alpha)
/// over a uniform damage grid. Serves as the independent reference for the
/// homogeneous solver branch.
#[derive(Debug, Clone, Serialize)]
pub struct HomogeneousOracle {
    pub grid_n: usize,
    pub eps: f64,
    pub alpha_star: f64,
    pub e_star: f64,
}

pub fn homogeneous_oracle(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    eps: f64,
    grid_n: usize,
) -> Result<HomogeneousOracle> {
    if grid_n < 1000 {
        return Err(Error::config(format!(
            "oracle grid must have at least 1000 points (got {grid_n})"
        )));
    }
    let e_mod = p.youngs_modulus();
    let drive = 0.5 * e_mod * eps * eps;
    let mut best_alpha = 0.0;
    let mut best_e = f64::INFINITY;
    for i in 0..=grid_n {
        let alpha = i as f64 / grid_n as f64;
        let e = law.degradation.value(alpha) * drive + law.damage_energy.value(alpha);
        if e < best_e {
            best_e = e;
            best_alpha = alpha;
        }
    }
    Ok(HomogeneousOracle {
        grid_n,
        eps,
        alpha_star: best_alpha,
        e_star: best_e,
    })
}

/// The nonnegative remainder integrals separating a 3D state from the
/// uniaxial structure, normalized by the discrete volume:
/// * `deviatoric`: mean of a(alpha) mu/2 (e11 - e22)^2,
/// * `poisson`: mean of a(alpha) 2(lambda + mu)((e11 + e22)/2 + nu e33)^2,
/// * `e33_variance`: mean of a(alpha) E/2 (e33 - slice mean of e33)^2.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RemainderIntegrals {
    pub deviatoric: f64,
    pub poisson: f64,
    pub e33_variance: f64,
}

impl RemainderIntegrals {
    pub fn as_array(&self) -> [f64; 3] {
        [self.deviatoric, self.poisson, self.e33_variance]
    }
}

/// Evaluates the remainder integrals for a converged 3D state. The slice
/// mean of e33 is taken per Gauss level over the disk cross-section, with
/// the degradation factor evaluated at the local damage.
pub fn remainder_integrals(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    mesh: &CylinderMesh,
    f: &Field3D,
) -> Result<RemainderIntegrals> {
    if !f.all_finite() {
        return Err(Error::NonFinite("field3d"));
    }
    let (e_mod, nu) = (p.youngs_modulus(), p.poisson_ratio());
    let (mu, lambda) = (p.mu, p.lambda);
    let ncells = mesh.n_cells();
    let n2c = mesh.n2d_cells();
    let w = mesh.quad.weight;

    // Pass 1: per-Gauss-level slice means of e33. Levels are indexed by
    // (slab, gz) with gz the axial bit of the Gauss point.
    let nlevels = 2 * mesh.nz;
    let mut level_sum = vec![CompensatedSum::new(); nlevels];
    let mut e33_qp = vec![0.0; ncells * 8];
    let mut e11_qp = vec![0.0; ncells * 8];
    let mut e22_qp = vec![0.0; ncells * 8];
    let mut a_qp = vec![0.0; ncells * 8];
    for cell in 0..ncells {
        let slab = mesh.cell_slab(cell);
        let nodes = mesh.cell_nodes(cell);
        for g in 0..8 {
            let pg = gradients_at(mesh, f, &nodes, g);
            let q = cell * 8 + g;
            e11_qp[q] = pg.du1[0];
            e22_qp[q] = pg.du2[1];
            e33_qp[q] = pg.du3[2];
            a_qp[q] = law.degradation.value(pg.alpha);
            let gz = (g >> 2) & 1;
            level_sum[2 * slab + gz].add(e33_qp[q]);
        }
    }
    // every level holds 4 transverse Gauss points per retained 2D cell
    let per_level = (4 * n2c) as f64;
    let level_mean: Vec<f64> = level_sum.iter().map(|s| s.value() / per_level).collect();

    let mut dev = CompensatedSum::new();
    let mut poi = CompensatedSum::new();
    let mut var = CompensatedSum::new();
    for cell in 0..ncells {
        let slab = mesh.cell_slab(cell);
        for g in 0..8 {
            let q = cell * 8 + g;
            let a = a_qp[q];
            let d = e11_qp[q] - e22_qp[q];
            dev.add(w * a * 0.5 * mu * d * d);
            let c = 0.5 * (e11_qp[q] + e22_qp[q]) + nu * e33_qp[q];
            poi.add(w * a * 2.0 * (lambda + mu) * c * c);
            let gz = (g >> 2) & 1;
            let dv = e33_qp[q] - level_mean[2 * slab + gz];
            var.add(w * a * 0.5 * e_mod * dv * dv);
        }
    }
    let inv = 1.0 / mesh.measure;
    Ok(RemainderIntegrals {
        deviatoric: dev.value() * inv,
        poisson: poi.value() * inv,
        e33_variance: var.value() * inv,
    })
}

/// Initial 1D damage profile for the study.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum Init1D {
    Uniform(f64),
    /// Triangular bump alpha(z) = height * max(0, 1 - |z - center| / width).
    Bump {
        center: f64,
        width: f64,
        height: f64,
    },
}

impl Init1D {
    pub fn apply(&self, mesh: &IntervalMesh, g: &mut Field1D) {
        match *self {
            Init1D::Uniform(c) => g.alphabar.fill(c.clamp(0.0, 1.0)),
            Init1D::Bump {
                center,
                width,
                height,
            } => {
                for (k, a) in g.alphabar.iter_mut().enumerate() {
                    let t = 1.0 - (mesh.z[k] - center).abs() / width;
                    *a = (height * t.max(0.0)).clamp(0.0, 1.0);
                }
            }
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match *self {
            Init1D::Uniform(c) => {
                if !(0.0..=1.0).contains(&c) {
                    v.push(format!(
                        "study.init1d uniform level must lie in [0,1] (got {c})"
                    ));
                }
            }
            Init1D::Bump {
                center,
                width,
                height,
            } => {
                if !(0.0..=1.0).contains(&center) {
                    v.push(format!(
                        "study.init1d bump center must lie in [0,1] (got {center})"
                    ));
                }
                if !(width > 0.0) {
                    v.push(format!("study.init1d bump width must be > 0 (got {width})"));
                }
                if !(0.0..=1.0).contains(&height) {
                    v.push(format!(
                        "study.init1d bump height must lie in [0,1] (got {height})"
                    ));
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyOptions {
    pub deltas: Vec<f64>,
    pub nxy: usize,
    pub nz: usize,
    pub nz1d: usize,
    /// Warm-start the 3D solves from the embedded 1D minimizer with the
    /// matched transverse field. A cold start uses the undamaged uniaxial
    /// state instead and helps detect spurious local minima.
    pub warm_start: bool,
    pub init1d: Init1D,
}

impl StudyOptions {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.deltas.is_empty() {
            v.push("study.deltas must not be empty".to_string());
        }
        for &d in &self.deltas {
            if !(d > 0.0 && d <= 1.0) {
                v.push(format!("study.deltas entries must lie in (0,1] (got {d})"));
            }
        }
        for w in self.deltas.windows(2) {
            if !(w[1] < w[0]) {
                v.push(format!(
                    "study.deltas must be strictly decreasing (got {} then {})",
                    w[0], w[1]
                ));
            }
        }
        if self.nz1d != self.nz {
            v.push(format!(
                "study.nz1d ({}) must match mesh.nz ({}) so slice profiles align",
                self.nz1d, self.nz
            ));
        }
        v.extend(self.init1d.violations());
        v
    }
}

/// Per-delta study results.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRecord {
    pub delta: f64,
    pub e3d_min: f64,
    pub e1d_min: f64,
    pub gap: f64,
    pub diag: DiagnosticsRecord,
    pub remainders: RemainderIntegrals,
    /// Volume-mean of |d alpha/dx|^2 + |d alpha/dy|^2 of the 3D minimizer.
    pub alpha_transverse_mean: f64,
    /// The a-priori bound 2 E_j L^2 delta^2 / (w1 ell^2) it must obey.
    pub alpha_transverse_bound: f64,
    /// Discrete L2 distance between the slice-averaged axial displacement of
    /// the 3D minimizer and the 1D minimizer.
    pub u3_slice_l2: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub wallclock_s: f64,
}

impl StudyRecord {
    pub fn csv_header() -> &'static str {
        "delta,e3d_min,e1d_min,gap,diag_u3,diag_u3_z,diag_poisson_x,diag_poisson_y,diag_shear,\
         diag_alpha_transverse,diag_alpha_z,remainder_deviatoric,remainder_poisson,remainder_e33_variance,\
         alpha_transverse_mean,alpha_transverse_bound,u3_slice_l2,outer_iterations,converged"
    }

    pub fn csv_row(&self) -> String {
        let nums = [
            self.delta,
            self.e3d_min,
            self.e1d_min,
            self.gap,
            self.diag.u3,
            self.diag.u3_z,
            self.diag.poisson_x,
            self.diag.poisson_y,
            self.diag.shear,
            self.diag.alpha_transverse,
            self.diag.alpha_z,
            self.remainders.deviatoric,
            self.remainders.poisson,
            self.remainders.e33_variance,
            self.alpha_transverse_mean,
            self.alpha_transverse_bound,
            self.u3_slice_l2,
        ]
        .map(crate::io::fmt_f64)
        .join(",");
        format!("{nums},{},{}", self.outer_iterations, self.converged)
    }
}

/// Monotonicity and bound checks over the converged records. Residuals below
/// `floor` count as zero so rounding noise cannot fail a comparison.
#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub gap_nonincreasing: bool,
    pub residuals_nonincreasing: bool,
    pub transverse_bound_ok: bool,
    pub remainders_nonnegative: bool,
    pub converged_records: usize,
}

const SLACK: f64 = 1.05;
const FLOOR: f64 = 1e-12;

pub fn summarize(records: &[StudyRecord]) -> StudySummary {
    let conv: Vec<&StudyRecord> = records.iter().filter(|r| r.converged).collect();
    let mono = |get: &dyn Fn(&StudyRecord) -> f64| -> bool {
        conv.windows(2).all(|w| {
            let (a, b) = (get(w[0]), get(w[1]));
            b <= SLACK * a || b < FLOOR
        })
    };
    let gap_nonincreasing = mono(&|r| r.gap.abs());
    let mut residuals_nonincreasing = true;
    for k in 0..7 {
        residuals_nonincreasing &= mono(&|r| r.diag.as_array()[k]);
    }
    let transverse_bound_ok = conv
        .iter()
        .all(|r| r.alpha_transverse_mean <= r.alpha_transverse_bound * (1.0 + 1e-9) + FLOOR);
    let remainders_nonnegative = records
        .iter()
        .all(|r| r.remainders.as_array().iter().all(|&x| x >= 0.0));
    StudySummary {
        gap_nonincreasing,
        residuals_nonincreasing,
        transverse_bound_ok,
        remainders_nonnegative,
        converged_records: conv.len(),
    }
}

/// Runs the full sweep: one 1D solve, then a 3D solve per delta on a fixed
/// mesh, each record carrying the residual diagnostics against the 1D
/// minimizer. Non-converged 3D solves are kept but flagged, and the summary
/// skips them.
pub fn gamma_sweep(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    solver: &SolverConfig,
    opts: &StudyOptions,
) -> Result<(Vec<StudyRecord>, StudySummary, SolveReport)> {
    let violations = opts.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    let mesh = build_cylinder(opts.nxy, opts.nz)?;
    let mesh1d = build_interval(opts.nz1d)?;
    let nu = p.poisson_ratio();

    let mut g = Field1D::affine(&mesh1d, p.eps_z, 0.0);
    opts.init1d.apply(&mesh1d, &mut g);
    // the multistart wrapper reports the spread across seeded starts when
    // solver.multistart > 0; alternate minimization only certifies critical
    // points, so disagreement between starts is worth surfacing
    let report1d = alternate_minimize_1d_multistart(p, law, &mesh1d, &mut g, solver)?;
    let e1d = report1d.energy.total;

    let mut records = Vec::with_capacity(opts.deltas.len());
    for &delta in &opts.deltas {
        let started = std::time::Instant::now();
        let mut f = if opts.warm_start {
            embed_1d_with_transverse(&g, delta, &mesh, &mesh1d, nu)?
        } else {
            Field3D::uniaxial_test(&mesh, delta, p.eps_z, nu)
        };
        let report = alternate_minimize_3d(p, law, &mesh, &mut f, solver)?;
        let e3d = report.energy.total;
        let diag = uniaxial_limit_diagnostics(&mesh, &mesh1d, &f, &g, nu)?;
        let remainders = remainder_integrals(p, law, &mesh, &f)?;
        let breakdown = energy_3d(p, law, &mesh, &f)?;
        // volume-mean transverse damage gradient and its a-priori bound
        let w1_l2 = 0.5 * p.w1 * p.ell_ratio_sq();
        let alpha_transverse_mean = if w1_l2 > 0.0 {
            breakdown.damage_grad_transverse * delta * delta / w1_l2
        } else {
            0.0
        };
        let alpha_transverse_bound = 2.0 * e3d.max(0.0) * delta * delta / (p.w1 * p.ell_ratio_sq());
        let prof = crate::fields::slice_average(&mesh, &f, crate::fields::Component::U3);
        let mut l2 = CompensatedSum::new();
        for (k, &v) in prof.iter().enumerate() {
            let d = v - g.u3bar[k];
            // trapezoid weights over the levels
            let wk = if k == 0 || k == mesh.nz { 0.5 } else { 1.0 } * mesh.hz;
            l2.add(wk * d * d);
        }
        records.push(StudyRecord {
            delta,
            e3d_min: e3d,
            e1d_min: e1d,
            gap: e3d - e1d,
            diag,
            remainders,
            alpha_transverse_mean,
            alpha_transverse_bound,
            u3_slice_l2: l2.value().sqrt(),
            outer_iterations: report.outer_iterations,
            converged: report.converged,
            wallclock_s: started.elapsed().as_secs_f64(),
        });
    }
    let summary = summarize(&records);
    Ok((records, summary, report1d))
}

/// One entry of a mesh-refinement series.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementRecord {
    pub nxy: usize,
    pub nz: usize,
    pub energy: f64,
    pub converged: bool,
}

/// Minimized 1D energy over a series of axial resolutions. Successive
/// differences estimate the discretization error entering the gap tolerance
/// budget of the sweep.
pub fn mesh_refinement_1d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    solver: &SolverConfig,
    init: Init1D,
    nz_list: &[usize],
) -> Result<Vec<RefinementRecord>> {
    let mut out = Vec::with_capacity(nz_list.len());
    for &nz in nz_list {
        let mesh = build_interval(nz)?;
        let mut g = Field1D::affine(&mesh, p.eps_z, 0.0);
        init.apply(&mesh, &mut g);
        let r = alternate_minimize_1d(p, law, &mesh, &mut g, solver)?;
        out.push(RefinementRecord {
            nxy: 0,
            nz,
            energy: r.energy.total,
            converged: r.converged,
        });
    }
    Ok(out)
}

/// Minimized 3D energy at fixed aspect ratio over a series of meshes, warm
/// started from the matching 1D state on each.
pub fn mesh_refinement_3d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    solver: &SolverConfig,
    delta: f64,
    init: Init1D,
    sizes: &[(usize, usize)],
) -> Result<Vec<RefinementRecord>> {
    let nu = p.poisson_ratio();
    let mut out = Vec::with_capacity(sizes.len());
    for &(nxy, nz) in sizes {
        let mesh = build_cylinder(nxy, nz)?;
        let mesh1d = build_interval(nz)?;
        let mut g = Field1D::affine(&mesh1d, p.eps_z, 0.0);
        init.apply(&mesh1d, &mut g);
        alternate_minimize_1d(p, law, &mesh1d, &mut g, solver)?;
        let mut f = embed_1d_with_transverse(&g, delta, &mesh, &mesh1d, nu)?;
        let r = alternate_minimize_3d(p, law, &mesh, &mut f, solver)?;
        out.push(RefinementRecord {
            nxy,
            nz,
            energy: r.energy.total,
            converged: r.converged,
        });
    }
    Ok(out)
}
