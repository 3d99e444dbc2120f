//! Self-checks behind the `validate` subcommand: algebraic identities,
//! quadrature consistency, the constant-integrand energy identity, and
//! finite-difference gradient verification.

use serde::Serialize;

use crate::energy::{energy_1d, energy_3d, grad_energy_1d, grad_energy_3d};
use crate::error::Result;
use crate::fields::{Field1D, Field3D};
use crate::material::{verify_uniaxial_identity, ConstitutiveLaw, MaterialParams};
use crate::mesh::{build_cylinder, build_interval};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

fn check(name: &str, value: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        value,
        tolerance,
        pass: value <= tolerance,
    }
}

/// Runs every validation check on the given parameters. Mesh sizes are kept
/// small; the checks are about correctness, not resolution.
pub fn run_checks(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    seed: u64,
) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    let mut rng = SplitMix64::new(seed);

    // uniaxial stiffness identity at the configured and random moduli
    let mut worst = verify_uniaxial_identity(p)?;
    for _ in 0..1000 {
        let mu = rng.uniform(0.05, 20.0);
        let lambda = rng.uniform(-0.55 * mu, 25.0 * mu);
        let q = MaterialParams { lambda, mu, ..*p };
        worst = worst.max(verify_uniaxial_identity(&q)?);
    }
    checks.push(check("uniaxial_identity_residual", worst, 1e-14));

    // quadrature integrates constants exactly
    let mesh = build_cylinder(12, 6)?;
    let ones = mesh.n_cells() as f64 * 8.0 * mesh.quad.weight;
    checks.push(check(
        "quadrature_constant_residual",
        (ones - mesh.measure).abs() / mesh.measure,
        1e-13,
    ));

    // constant-integrand energy identity on the test field
    let nu = p.poisson_ratio();
    let f = Field3D::uniaxial_test(&mesh, 0.5, p.eps_z, nu);
    let b = energy_3d(p, law, &mesh, &f)?;
    let expected = 0.5 * p.youngs_modulus() * p.eps_z * p.eps_z;
    let rel = if expected > 0.0 {
        (b.total - expected).abs() / expected
    } else {
        b.total.abs()
    };
    checks.push(check("test_field_energy_residual", rel, 1e-12));

    // finite-difference gradient checks, 3 random fields each
    let mut worst3 = 0.0f64;
    for _ in 0..3 {
        worst3 = worst3.max(fd_residual_3d(p, law, &mut rng)?);
    }
    checks.push(check("gradient_fd_residual_3d", worst3, 1e-6));

    let mut worst1 = 0.0f64;
    for _ in 0..3 {
        worst1 = worst1.max(fd_residual_1d(p, law, &mut rng)?);
    }
    checks.push(check("gradient_fd_residual_1d", worst1, 1e-6));

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(ValidationReport { checks, all_pass })
}

/// Relative mismatch between the assembled directional derivative and a
/// central finite difference on a random admissible 3D state.
pub fn fd_residual_3d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    rng: &mut SplitMix64,
) -> Result<f64> {
    let mesh = build_cylinder(6, 4)?;
    let n = mesh.n_nodes();
    let mut f = Field3D::axial_affine(&mesh, 0.5, p.eps_z);
    for i in 0..n {
        f.u1[i] += rng.uniform(-0.1, 0.1);
        f.u2[i] += rng.uniform(-0.1, 0.1);
        f.alpha[i] = rng.uniform(0.1, 0.9);
    }
    for i in 0..n {
        if !mesh.z0_nodes().contains(&i) && !mesh.z1_nodes().contains(&i) {
            f.u3[i] += rng.uniform(-0.05, 0.05);
        }
    }
    let grad = grad_energy_3d(p, law, &mesh, &f)?;
    let mut d = vec![0.0; 4 * n];
    for v in d.iter_mut() {
        *v = rng.uniform(-1.0, 1.0);
    }
    for i in mesh.z0_nodes().chain(mesh.z1_nodes()) {
        d[2 * n + i] = 0.0;
    }
    let h = 1e-6;
    let eval = |sign: f64| -> Result<f64> {
        let mut fp = f.clone();
        for i in 0..n {
            fp.u1[i] += sign * h * d[i];
            fp.u2[i] += sign * h * d[n + i];
            fp.u3[i] += sign * h * d[2 * n + i];
            fp.alpha[i] += sign * h * d[3 * n + i];
        }
        Ok(energy_3d(p, law, &mesh, &fp)?.total)
    };
    let fd = (eval(1.0)? - eval(-1.0)?) / (2.0 * h);
    let mut dir = 0.0;
    for i in 0..n {
        dir += grad.u1[i] * d[i]
            + grad.u2[i] * d[n + i]
            + grad.u3[i] * d[2 * n + i]
            + grad.alpha[i] * d[3 * n + i];
    }
    Ok((fd - dir).abs() / dir.abs().max(1e-8))
}

/// Same check for the 1D energy.
pub fn fd_residual_1d(
    p: &MaterialParams,
    law: &ConstitutiveLaw,
    rng: &mut SplitMix64,
) -> Result<f64> {
    let mesh = build_interval(16)?;
    let n = mesh.n_nodes();
    let mut g = Field1D::affine(&mesh, p.eps_z, 0.0);
    for k in 1..mesh.nz {
        g.u3bar[k] += rng.uniform(-0.05, 0.05);
    }
    for a in g.alphabar.iter_mut() {
        *a = rng.uniform(0.1, 0.9);
    }
    let grad = grad_energy_1d(p, law, &mesh, &g)?;
    let mut du = vec![0.0; n];
    let mut da = vec![0.0; n];
    for k in 0..n {
        du[k] = rng.uniform(-1.0, 1.0);
        da[k] = rng.uniform(-1.0, 1.0);
    }
    du[0] = 0.0;
    du[n - 1] = 0.0;
    let h = 1e-6;
    let eval = |sign: f64| -> Result<f64> {
        let mut gp = g.clone();
        for k in 0..n {
            gp.u3bar[k] += sign * h * du[k];
            gp.alphabar[k] += sign * h * da[k];
        }
        Ok(energy_1d(p, law, &mesh, &gp)?.total)
    };
    let fd = (eval(1.0)? - eval(-1.0)?) / (2.0 * h);
    let mut dir = 0.0;
    for k in 0..n {
        dir += grad.u3bar[k] * du[k] + grad.alphabar[k] * da[k];
    }
    Ok((fd - dir).abs() / dir.abs().max(1e-8))
}
