//! Run configuration: a plain-text `section.key = value` format.
//!
//! Grammar (one entry per line):
//!   line    := `[entry] [comment]`
//!   comment := '#' .*
//!   entry   := key '=' value
//!   key     := section '.' name        (lowercase, dotted)
//!   value   := number | bool | word | list
//!   list    := number (',' number)*
//!
//! Unknown keys are rejected. Validation collects every violated constraint
//! at once instead of stopping at the first.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::material::{ConstitutiveLaw, DamageEnergy, Degradation, MaterialParams, MonotoneTable};
use crate::solver::SolverConfig;
use crate::study::{Init1D, StudyOptions};

#[derive(Debug, Clone, Serialize)]
pub enum DegradationSpec {
    Quadratic,
    Tabulated(PathBuf),
}

#[derive(Debug, Clone, Serialize)]
pub enum DamageSpec {
    At1,
    At2,
    Tabulated(PathBuf),
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshSpec {
    pub nxy: usize,
    pub nz: usize,
    pub nz1d: usize,
    pub dump: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySpec {
    pub deltas: Vec<f64>,
    pub output_dir: PathBuf,
    pub warm_start: bool,
    pub init1d: Init1D,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoverySpec {
    pub deltas: Vec<f64>,
    pub kink_z: f64,
    pub kink_u: f64,
    pub alpha: f64,
}

/// Everything a run needs, parsed and validated.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub material: MaterialParams,
    pub degradation: DegradationSpec,
    pub damage: DamageSpec,
    pub mesh: MeshSpec,
    pub solver: SolverConfig,
    pub study: StudySpec,
    pub recovery: RecoverySpec,
    /// FNV-1a hash of the raw config text; stamped into every output file.
    pub config_hash: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            material: MaterialParams {
                lambda: 1.0,
                mu: 1.0,
                eta: 0.1,
                w1: 1.0,
                ell: 0.1,
                rod_length: 1.0,
                eps_z: 0.5,
            },
            degradation: DegradationSpec::Quadratic,
            damage: DamageSpec::At2,
            mesh: MeshSpec {
                nxy: 16,
                nz: 32,
                nz1d: 32,
                dump: false,
            },
            solver: SolverConfig::default(),
            study: StudySpec {
                deltas: vec![0.4, 0.2, 0.1],
                output_dir: PathBuf::from("out"),
                warm_start: true,
                init1d: Init1D::Uniform(0.0),
            },
            recovery: RecoverySpec {
                deltas: vec![0.4, 0.2, 0.1, 0.05],
                kink_z: 0.5,
                kink_u: 0.75,
                alpha: 0.0,
            },
            config_hash: String::new(),
        }
    }
}

fn parse_f64(key: &str, raw: &str, errs: &mut Vec<String>) -> f64 {
    match raw.parse::<f64>() {
        Ok(v) => v,
        Err(_) => {
            errs.push(format!("{key}: expected a number, got '{raw}'"));
            f64::NAN
        }
    }
}

fn parse_usize(key: &str, raw: &str, errs: &mut Vec<String>) -> usize {
    match raw.parse::<usize>() {
        Ok(v) => v,
        Err(_) => {
            errs.push(format!(
                "{key}: expected a nonnegative integer, got '{raw}'"
            ));
            0
        }
    }
}

fn parse_bool(key: &str, raw: &str, errs: &mut Vec<String>) -> bool {
    match raw {
        "true" => true,
        "false" => false,
        _ => {
            errs.push(format!("{key}: expected true or false, got '{raw}'"));
            false
        }
    }
}

fn parse_list(key: &str, raw: &str, errs: &mut Vec<String>) -> Vec<f64> {
    raw.split(',')
        .map(|tok| parse_f64(key, tok.trim(), errs))
        .collect()
}

/// Parses config text. Returns the config or the full list of problems.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    let mut errs: Vec<String> = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errs.push(format!("line {}: expected 'key = value'", lineno + 1));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if entries.insert(key.clone(), value).is_some() {
            errs.push(format!("line {}: duplicate key '{key}'", lineno + 1));
        }
    }

    let mut cfg = RunConfig {
        config_hash: crate::io::fnv1a_hex(text.as_bytes()),
        ..RunConfig::default()
    };

    let mut seen_init1d: Option<String> = None;
    for (key, value) in &entries {
        match key.as_str() {
            "material.lambda" => cfg.material.lambda = parse_f64(key, value, &mut errs),
            "material.mu" => cfg.material.mu = parse_f64(key, value, &mut errs),
            "material.eta" => cfg.material.eta = parse_f64(key, value, &mut errs),
            "material.w1" => cfg.material.w1 = parse_f64(key, value, &mut errs),
            "material.ell" => cfg.material.ell = parse_f64(key, value, &mut errs),
            "material.rod_length" => cfg.material.rod_length = parse_f64(key, value, &mut errs),
            "material.eps_z" => cfg.material.eps_z = parse_f64(key, value, &mut errs),
            "law.degradation" => {
                cfg.degradation = match value.as_str() {
                    "quadratic" => DegradationSpec::Quadratic,
                    other => match other.strip_prefix("tabulated:") {
                        Some(path) => DegradationSpec::Tabulated(base_dir.join(path.trim())),
                        None => {
                            errs.push(format!(
                                "law.degradation: expected quadratic or tabulated:PATH, got '{other}'"
                            ));
                            DegradationSpec::Quadratic
                        }
                    },
                }
            }
            "law.damage" => {
                cfg.damage = match value.as_str() {
                    "at1" => DamageSpec::At1,
                    "at2" => DamageSpec::At2,
                    other => match other.strip_prefix("tabulated:") {
                        Some(path) => DamageSpec::Tabulated(base_dir.join(path.trim())),
                        None => {
                            errs.push(format!(
                                "law.damage: expected at1, at2 or tabulated:PATH, got '{other}'"
                            ));
                            DamageSpec::At2
                        }
                    },
                }
            }
            "mesh.nxy" => cfg.mesh.nxy = parse_usize(key, value, &mut errs),
            "mesh.nz" => cfg.mesh.nz = parse_usize(key, value, &mut errs),
            "mesh.nz1d" => cfg.mesh.nz1d = parse_usize(key, value, &mut errs),
            "mesh.dump" => cfg.mesh.dump = parse_bool(key, value, &mut errs),
            "solver.outer_max_iters" => {
                cfg.solver.outer_max_iters = parse_usize(key, value, &mut errs)
            }
            "solver.outer_tol_alpha" => {
                cfg.solver.outer_tol_alpha = parse_f64(key, value, &mut errs)
            }
            "solver.outer_tol_energy" => {
                cfg.solver.outer_tol_energy = parse_f64(key, value, &mut errs)
            }
            "solver.cg_tol" => cfg.solver.cg_tol = parse_f64(key, value, &mut errs),
            "solver.cg_max_iters" => cfg.solver.cg_max_iters = parse_usize(key, value, &mut errs),
            "solver.pgd_tol" => cfg.solver.pgd_tol = parse_f64(key, value, &mut errs),
            "solver.pgd_max_iters" => cfg.solver.pgd_max_iters = parse_usize(key, value, &mut errs),
            "solver.seed" => cfg.solver.seed = parse_usize(key, value, &mut errs) as u64,
            "solver.multistart" => cfg.solver.multistart = parse_usize(key, value, &mut errs),
            "study.deltas" => cfg.study.deltas = parse_list(key, value, &mut errs),
            "study.output_dir" => cfg.study.output_dir = PathBuf::from(value),
            "study.warm_start" => cfg.study.warm_start = parse_bool(key, value, &mut errs),
            "study.init1d" => seen_init1d = Some(value.clone()),
            "recovery.deltas" => cfg.recovery.deltas = parse_list(key, value, &mut errs),
            "recovery.kink_z" => cfg.recovery.kink_z = parse_f64(key, value, &mut errs),
            "recovery.kink_u" => cfg.recovery.kink_u = parse_f64(key, value, &mut errs),
            "recovery.alpha" => cfg.recovery.alpha = parse_f64(key, value, &mut errs),
            other => errs.push(format!("unknown key '{other}'")),
        }
    }

    if let Some(raw) = seen_init1d {
        if let Some(level) = raw.strip_prefix("uniform:") {
            cfg.study.init1d = Init1D::Uniform(parse_f64("study.init1d", level.trim(), &mut errs));
        } else if let Some(rest) = raw.strip_prefix("bump:") {
            let vals = parse_list("study.init1d", rest, &mut errs);
            if vals.len() == 3 {
                cfg.study.init1d = Init1D::Bump {
                    center: vals[0],
                    width: vals[1],
                    height: vals[2],
                };
            } else {
                errs.push(format!(
                    "study.init1d: bump needs center,width,height (got '{raw}')"
                ));
            }
        } else {
            errs.push(format!(
                "study.init1d: expected uniform:LEVEL or bump:CENTER,WIDTH,HEIGHT (got '{raw}')"
            ));
        }
    }

    // domain constraints, gathered all at once
    errs.extend(cfg.material.violations());
    errs.extend(cfg.solver.violations());
    if cfg.mesh.nxy < 4 {
        errs.push(format!(
            "mesh.nxy must be at least 4 (got {})",
            cfg.mesh.nxy
        ));
    }
    if cfg.mesh.nz < 2 {
        errs.push(format!("mesh.nz must be at least 2 (got {})", cfg.mesh.nz));
    }
    if cfg.mesh.nz1d < 2 {
        errs.push(format!(
            "mesh.nz1d must be at least 2 (got {})",
            cfg.mesh.nz1d
        ));
    }
    errs.extend(
        cfg.study_options()
            .violations()
            .into_iter()
            .map(|v| v.replace("study.nz1d", "mesh.nz1d")),
    );
    for w in cfg.recovery.deltas.windows(2) {
        if !(w[1] < w[0]) {
            errs.push(format!(
                "recovery.deltas must be strictly decreasing (got {} then {})",
                w[0], w[1]
            ));
        }
    }
    if !(cfg.recovery.kink_z > 0.0 && cfg.recovery.kink_z < 1.0) {
        errs.push(format!(
            "recovery.kink_z must lie in (0,1) (got {})",
            cfg.recovery.kink_z
        ));
    }
    if !(cfg.recovery.kink_u > 0.0 && cfg.recovery.kink_u < 1.0) {
        errs.push(format!(
            "recovery.kink_u must lie in (0,1) (got {})",
            cfg.recovery.kink_u
        ));
    }
    if !(0.0..=1.0).contains(&cfg.recovery.alpha) {
        errs.push(format!(
            "recovery.alpha must lie in [0,1] (got {})",
            cfg.recovery.alpha
        ));
    }

    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errs))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

fn load_table(path: &Path, increasing: bool) -> Result<MonotoneTable> {
    let text = std::fs::read_to_string(path)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            return Err(Error::config(format!(
                "{}: line {} needs two columns",
                path.display(),
                lineno + 1
            )));
        };
        let pa: f64 = a.parse().map_err(|_| {
            Error::config(format!(
                "{}: line {}: bad number",
                path.display(),
                lineno + 1
            ))
        })?;
        let pb: f64 = b.parse().map_err(|_| {
            Error::config(format!(
                "{}: line {}: bad number",
                path.display(),
                lineno + 1
            ))
        })?;
        x.push(pa);
        y.push(pb);
    }
    MonotoneTable::new(x, y, increasing)
}

impl RunConfig {
    /// Builds the constitutive law, loading tabulated files if configured,
    /// and checks the endpoint axioms against the material parameters.
    pub fn build_law(&self) -> Result<ConstitutiveLaw> {
        let degradation = match &self.degradation {
            DegradationSpec::Quadratic => Degradation::Quadratic {
                eta: self.material.eta,
            },
            DegradationSpec::Tabulated(path) => Degradation::Tabulated(load_table(path, false)?),
        };
        let damage_energy = match &self.damage {
            DamageSpec::At1 => DamageEnergy::At1 {
                w1: self.material.w1,
            },
            DamageSpec::At2 => DamageEnergy::At2 {
                w1: self.material.w1,
            },
            DamageSpec::Tabulated(path) => DamageEnergy::Tabulated(load_table(path, true)?),
        };
        let law = ConstitutiveLaw {
            degradation,
            damage_energy,
        };
        let v = law.violations(&self.material);
        if v.is_empty() {
            Ok(law)
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn study_options(&self) -> StudyOptions {
        StudyOptions {
            deltas: self.study.deltas.clone(),
            nxy: self.mesh.nxy,
            nz: self.mesh.nz,
            nz1d: self.mesh.nz1d,
            warm_start: self.study.warm_start,
            init1d: self.study.init1d,
        }
    }
}
