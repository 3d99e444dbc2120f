//! Material parameters and the two constitutive scalar laws.
//!
//! The elastic response is isotropic linear elasticity with Lame constants
//! `lambda`, `mu`. Stiffness is degraded by a factor `a(alpha)` with
//! `a(0) = 1` and `a(1) = eta`, and damage dissipates a local energy
//! `w(alpha)` with `w(0) = 0` and `w(1) = w1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Material constants and loading for the rescaled rod problem.
///
/// * `lambda`, `mu`: Lame constants, `mu > 0`, `lambda + mu > 0`.
/// * `eta`: residual stiffness fraction of the fully damaged state, in (0,1).
/// * `w1`: damage energy scale `w(1)`, positive.
/// * `ell`: internal length of the damage gradient term, positive.
/// * `rod_length`: physical rod length `L`, positive.
/// * `eps_z`: imposed axial strain; the top face carries `u3 = -eps_z`.
///   Positive values model compression, negative values tension.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MaterialParams {
    pub lambda: f64,
    pub mu: f64,
    pub eta: f64,
    pub w1: f64,
    pub ell: f64,
    pub rod_length: f64,
    pub eps_z: f64,
}

impl MaterialParams {
    /// Collects every violated constraint; empty means valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.mu > 0.0) {
            v.push(format!("material.mu must be > 0 (got {})", self.mu));
        }
        if !(self.lambda + self.mu > 0.0) {
            v.push(format!(
                "material.lambda + material.mu must be > 0 (got {})",
                self.lambda + self.mu
            ));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            v.push(format!("material.eta must lie in (0,1) (got {})", self.eta));
        }
        if !(self.w1 > 0.0) {
            v.push(format!("material.w1 must be > 0 (got {})", self.w1));
        }
        if !(self.ell > 0.0) {
            v.push(format!("material.ell must be > 0 (got {})", self.ell));
        }
        if !(self.rod_length > 0.0) {
            v.push(format!(
                "material.rod_length must be > 0 (got {})",
                self.rod_length
            ));
        }
        if !self.eps_z.is_finite() {
            v.push("material.eps_z must be finite".to_string());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Young's modulus E = mu (3 lambda + 2 mu) / (lambda + mu).
    pub fn youngs_modulus(&self) -> f64 {
        self.mu * (3.0 * self.lambda + 2.0 * self.mu) / (self.lambda + self.mu)
    }

    /// Poisson's ratio nu = lambda / (2 (lambda + mu)).
    pub fn poisson_ratio(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }

    /// Squared ratio (ell / L) entering the damage gradient term.
    pub fn ell_ratio_sq(&self) -> f64 {
        let r = self.ell / self.rod_length;
        r * r
    }
}

/// Derived isotropic moduli (E, nu) with parameter validation.
pub fn derived_moduli(p: &MaterialParams) -> Result<(f64, f64)> {
    if !(p.mu > 0.0) || !(p.lambda + p.mu > 0.0) {
        return Err(Error::config(format!(
            "ellipticity requires mu > 0 and lambda + mu > 0 (got mu = {}, lambda = {})",
            p.mu, p.lambda
        )));
    }
    Ok((p.youngs_modulus(), p.poisson_ratio()))
}

/// Relative residual of the algebraic identity
/// mu (2 nu^2 + 1) + (lambda / 2)(2 nu - 1)^2 = E / 2,
/// which expresses the uniaxial stiffness of an isotropic material.
pub fn verify_uniaxial_identity(p: &MaterialParams) -> Result<f64> {
    let (e, nu) = derived_moduli(p)?;
    let lhs = p.mu * (2.0 * nu * nu + 1.0) + 0.5 * p.lambda * (2.0 * nu - 1.0) * (2.0 * nu - 1.0);
    let rhs = 0.5 * e;
    Ok((lhs - rhs).abs() / rhs.abs())
}

/// Table of (alpha, value) samples interpolated by a monotone cubic
/// (Fritsch-Carlson). The interpolant preserves the monotonicity of the data,
/// which is validated at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotoneTable {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Endpoint derivatives chosen by the Fritsch-Carlson limiter.
    d: Vec<f64>,
}

impl MonotoneTable {
    /// Builds the interpolant. `x` must be strictly increasing and start at 0
    /// and end at 1; `y` must be monotone in the direction `increasing`.
    pub fn new(x: Vec<f64>, y: Vec<f64>, increasing: bool) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::config(
                "tabulated law needs at least two (alpha, value) samples",
            ));
        }
        if (x[0] - 0.0).abs() > 1e-12 || (x[x.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "tabulated law must cover alpha in [0, 1] exactly",
            ));
        }
        for i in 1..x.len() {
            if !(x[i] > x[i - 1]) {
                return Err(Error::config(
                    "tabulated alpha samples must be strictly increasing",
                ));
            }
            let dy = y[i] - y[i - 1];
            if increasing && !(dy > 0.0) {
                return Err(Error::config(
                    "tabulated values must be strictly increasing",
                ));
            }
            if !increasing && !(dy < 0.0) {
                return Err(Error::config(
                    "tabulated values must be strictly decreasing",
                ));
            }
        }
        let n = x.len();
        let mut slopes = vec![0.0; n - 1];
        for i in 0..n - 1 {
            slopes[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        }
        // Fritsch-Carlson derivative limiter keeps the cubic monotone on
        // every interval.
        let mut d = vec![0.0; n];
        d[0] = slopes[0];
        d[n - 1] = slopes[n - 2];
        for i in 1..n - 1 {
            if slopes[i - 1] * slopes[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
                let w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
                d[i] = (w1 + w2) / (w1 / slopes[i - 1] + w2 / slopes[i]);
            }
        }
        for i in 0..n - 1 {
            if slopes[i] != 0.0 {
                let a = d[i] / slopes[i];
                let b = d[i + 1] / slopes[i];
                let s = (a * a + b * b).sqrt();
                if s > 3.0 {
                    let t = 3.0 / s;
                    d[i] = t * a * slopes[i];
                    d[i + 1] = t * b * slopes[i];
                }
            }
        }
        Ok(Self { x, y, d })
    }

    fn segment(&self, t: f64) -> usize {
        // Clamped lookup; t outside [0,1] uses the boundary segment.
        let n = self.x.len();
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.x[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Value and first derivative of the interpolant at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i], self.d[i + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let v = h00 * y0 + h * h10 * d0 + h01 * y1 + h * h11 * d1;
        let dh00 = 6.0 * s * (s - 1.0);
        let dh10 = (1.0 - s) * (1.0 - 3.0 * s);
        let dh01 = -dh00;
        let dh11 = s * (3.0 * s - 2.0);
        let dv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
        (v, dv)
    }
}

/// Stiffness degradation factor a(alpha).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Degradation {
    /// a(alpha) = eta + (1 - eta)(1 - alpha)^2. Quadratic, strictly
    /// decreasing, with a(0) = 1 and a(1) = eta.
    Quadratic {
        eta: f64,
    },
    Tabulated(MonotoneTable),
}

impl Degradation {
    #[inline]
    pub fn value(&self, alpha: f64) -> f64 {
        match self {
            Degradation::Quadratic { eta } => {
                let r = 1.0 - alpha;
                eta + (1.0 - eta) * r * r
            }
            Degradation::Tabulated(t) => t.eval(alpha).0,
        }
    }

    #[inline]
    pub fn deriv(&self, alpha: f64) -> f64 {
        match self {
            Degradation::Quadratic { eta } => -2.0 * (1.0 - eta) * (1.0 - alpha),
            Degradation::Tabulated(t) => t.eval(alpha).1,
        }
    }
}

/// Local damage energy density w(alpha).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DamageEnergy {
    /// w(alpha) = w1 * alpha. Linear; gives an elastic threshold.
    At1 {
        w1: f64,
    },
    /// w(alpha) = w1 * alpha^2. Smooth at alpha = 0; damage starts at any load.
    At2 {
        w1: f64,
    },
    Tabulated(MonotoneTable),
}

impl DamageEnergy {
    #[inline]
    pub fn value(&self, alpha: f64) -> f64 {
        match self {
            DamageEnergy::At1 { w1 } => w1 * alpha,
            DamageEnergy::At2 { w1 } => w1 * alpha * alpha,
            DamageEnergy::Tabulated(t) => t.eval(alpha).0,
        }
    }

    #[inline]
    pub fn deriv(&self, alpha: f64) -> f64 {
        match self {
            DamageEnergy::At1 { w1 } => *w1,
            DamageEnergy::At2 { w1 } => 2.0 * w1 * alpha,
            DamageEnergy::Tabulated(t) => t.eval(alpha).1,
        }
    }
}

/// The pair (a, w) used by every energy evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstitutiveLaw {
    pub degradation: Degradation,
    pub damage_energy: DamageEnergy,
}

impl ConstitutiveLaw {
    /// Quadratic degradation with the damage energy of choice; the standard
    /// configuration.
    pub fn standard(p: &MaterialParams, at1: bool) -> Self {
        ConstitutiveLaw {
            degradation: Degradation::Quadratic { eta: p.eta },
            damage_energy: if at1 {
                DamageEnergy::At1 { w1: p.w1 }
            } else {
                DamageEnergy::At2 { w1: p.w1 }
            },
        }
    }

    /// Checks the endpoint and monotonicity axioms against the material
    /// parameters; lists every violation found.
    pub fn violations(&self, p: &MaterialParams) -> Vec<String> {
        let mut v = Vec::new();
        let a0 = self.degradation.value(0.0);
        let a1 = self.degradation.value(1.0);
        if (a0 - 1.0).abs() > 1e-10 {
            v.push(format!("degradation must satisfy a(0) = 1 (got {a0})"));
        }
        if (a1 - p.eta).abs() > 1e-10 {
            v.push(format!(
                "degradation must satisfy a(1) = eta = {} (got {a1})",
                p.eta
            ));
        }
        let w0 = self.damage_energy.value(0.0);
        let w1 = self.damage_energy.value(1.0);
        if w0.abs() > 1e-12 {
            v.push(format!("damage energy must satisfy w(0) = 0 (got {w0})"));
        }
        if (w1 - p.w1).abs() > 1e-10 * p.w1.max(1.0) {
            v.push(format!(
                "damage energy must satisfy w(1) = w1 = {} (got {w1})",
                p.w1
            ));
        }
        v
    }
}

fn check_unit_range(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Field(format!("alpha = {alpha} is outside [0, 1]")));
    }
    Ok(())
}

/// a(alpha) and a'(alpha) with the admissible-range check.
pub fn eval_degradation(law: &ConstitutiveLaw, alpha: f64) -> Result<(f64, f64)> {
    check_unit_range(alpha)?;
    Ok((law.degradation.value(alpha), law.degradation.deriv(alpha)))
}

/// w(alpha) and w'(alpha) with the admissible-range check.
pub fn eval_damage_energy(law: &ConstitutiveLaw, alpha: f64) -> Result<(f64, f64)> {
    check_unit_range(alpha)?;
    Ok((
        law.damage_energy.value(alpha),
        law.damage_energy.deriv(alpha),
    ))
}

/// Strain at which the damage threshold of the AT1-type law is reached under
/// uniaxial loading: eps_c = sqrt(w1 / (E (1 - eta))). Below it the pointwise
/// first variation at alpha = 0 is nonnegative and the undamaged state is
/// stationary.
pub fn at1_threshold_strain(p: &MaterialParams) -> f64 {
    (p.w1 / (p.youngs_modulus() * (1.0 - p.eta))).sqrt()
}
