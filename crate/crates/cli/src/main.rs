//! Command-line front end: config-driven solves, the recovery sweep, the
//! dimension-reduction study, and self-validation.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 solver non-convergence, 4 i/o error. Failures also print a
//! machine-readable JSON object to stdout.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rodamage_core::config::{load_config, RunConfig};
use rodamage_core::energy::{energy_1d, energy_3d, EnergyBreakdown};
use rodamage_core::error::Error;
use rodamage_core::fields::{slice_average, Component, Field1D, Field3D};
use rodamage_core::io::{self, fmt_f64, Series};
use rodamage_core::mesh::{build_cylinder, build_interval};
use rodamage_core::recovery::{kinked_profile, recovery_sweep};
use rodamage_core::solver::{alternate_minimize_1d_multistart, alternate_minimize_3d, SolveReport};
use rodamage_core::study::gamma_sweep;
use rodamage_core::validate::run_checks;

#[derive(Parser)]
#[command(
    name = "rodamage",
    about = "Gradient-damage energies on a slender cylinder: solves, recovery sweeps, and the dimension-reduction study",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the run configuration file.
    #[arg(long, global = true, default_value = "configs/default.cfg")]
    config: PathBuf,
    /// Output directory; overrides study.output_dir from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the cell kernels (1 = sequential). Results are
    /// bit-identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed override for randomized options.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the 1D energy and write the profile.
    Solve1d,
    /// Minimize the 3D energy at a given aspect ratio.
    Solve3d {
        /// Aspect ratio delta in (0, 1].
        #[arg(long)]
        delta: f64,
    },
    /// Evaluate the recovery construction over the configured delta sweep.
    Recovery,
    /// Run the full dimension-reduction study.
    GammaStudy,
    /// Run identity and gradient self-checks only.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rodamage_core::exec::set_parallel(n > 1);
        if n > 1 {
            // sizes the rayon global pool, which reads this at first use
            std::env::set_var("RAYON_NUM_THREADS", n.to_string());
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            let (kind, code) = match &err {
                Error::Config(_) => ("config", 2),
                Error::Mesh(_) | Error::Field(_) | Error::NonFinite(_) => ("config", 2),
                Error::NonConvergence { .. } => ("solver", 3),
                Error::Io(_) | Error::Serialize(_) => ("io", 4),
            };
            let mut payload = serde_json::json!({
                "error": {
                    "kind": kind,
                    "message": err.to_string(),
                }
            });
            if let Error::Config(violations) = &err {
                payload["error"]["violations"] = serde_json::json!(violations);
            }
            println!("{payload}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(out) = &cli.out {
        cfg.study.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    let out_dir = cfg.study.output_dir.clone();
    match &cli.command {
        Command::Solve1d => cmd_solve1d(&cfg, &out_dir),
        Command::Solve3d { delta } => cmd_solve3d(&cfg, &out_dir, *delta),
        Command::Recovery => cmd_recovery(&cfg, &out_dir),
        Command::GammaStudy => cmd_gamma_study(&cfg, &out_dir),
        Command::Validate => cmd_validate(&cfg),
    }
}

fn report_json(cfg: &RunConfig, report: &SolveReport) -> serde_json::Value {
    serde_json::json!({
        "config_hash": cfg.config_hash,
        "report": report,
    })
}

fn energy_json(cfg: &RunConfig, energy: &EnergyBreakdown) -> serde_json::Value {
    serde_json::json!({
        "config_hash": cfg.config_hash,
        "energy": energy,
    })
}

fn energy_csv(cfg: &RunConfig, energy: &EnergyBreakdown) -> String {
    format!(
        "# config_hash={}\n{}\n{}\n",
        cfg.config_hash,
        EnergyBreakdown::csv_header(),
        energy.csv_row()
    )
}

fn profile_csv(cfg: &RunConfig, z: &[f64], u3: &[f64], alpha: &[f64]) -> String {
    let mut text = format!("# config_hash={}\nz,u3bar,alphabar\n", cfg.config_hash);
    for k in 0..z.len() {
        text.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(z[k]),
            fmt_f64(u3[k]),
            fmt_f64(alpha[k])
        ));
    }
    text
}

/// Energy after every half step of the alternate minimization.
fn trace_csv(cfg: &RunConfig, report: &SolveReport) -> String {
    let mut text = format!("# config_hash={}\nstep,energy\n", cfg.config_hash);
    for (k, e) in report.energy_trace.iter().enumerate() {
        text.push_str(&format!("{k},{}\n", fmt_f64(*e)));
    }
    text
}

fn cmd_solve1d(cfg: &RunConfig, out: &Path) -> Result<ExitCode, Error> {
    let law = cfg.build_law()?;
    let mesh = build_interval(cfg.mesh.nz1d)?;
    let mut g = Field1D::affine(&mesh, cfg.material.eps_z, 0.0);
    cfg.study.init1d.apply(&mesh, &mut g);
    let report = alternate_minimize_1d_multistart(&cfg.material, &law, &mesh, &mut g, &cfg.solver)?;
    let energy = energy_1d(&cfg.material, &law, &mesh, &g)?;
    io::write_json(&out.join("report1d.json"), &report_json(cfg, &report))?;
    io::write_json(&out.join("energy1d.json"), &energy_json(cfg, &energy))?;
    io::write_text(&out.join("energy1d.csv"), &energy_csv(cfg, &energy))?;
    io::write_text(&out.join("trace1d.csv"), &trace_csv(cfg, &report))?;
    io::write_text(
        &out.join("solution1d.csv"),
        &profile_csv(cfg, &mesh.z, &g.u3bar, &g.alphabar),
    )?;
    eprintln!(
        "solve1d: energy {:.6e}, {} outer iterations, converged = {} ({:.2}s)",
        energy.total, report.outer_iterations, report.converged, report.wallclock_s
    );
    if report.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Error::NonConvergence {
            solver: "alternate minimization (1d)",
            residual: report.alpha_update_inf,
            iterations: report.outer_iterations,
        })
    }
}

fn cmd_solve3d(cfg: &RunConfig, out: &Path, delta: f64) -> Result<ExitCode, Error> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::config(format!(
            "--delta must lie in (0, 1] (got {delta})"
        )));
    }
    let law = cfg.build_law()?;
    let mesh = build_cylinder(cfg.mesh.nxy, cfg.mesh.nz)?;
    if cfg.mesh.dump {
        io::write_json(&out.join("mesh.json"), &mesh.dump_json())?;
    }
    let nu = cfg.material.poisson_ratio();
    let mut f = Field3D::uniaxial_test(&mesh, delta, cfg.material.eps_z, nu);
    let report = alternate_minimize_3d(&cfg.material, &law, &mesh, &mut f, &cfg.solver)?;
    let energy = energy_3d(&cfg.material, &law, &mesh, &f)?;
    io::write_json(&out.join("report3d.json"), &report_json(cfg, &report))?;
    io::write_json(&out.join("energy3d.json"), &energy_json(cfg, &energy))?;
    io::write_text(&out.join("energy3d.csv"), &energy_csv(cfg, &energy))?;
    io::write_text(&out.join("trace3d.csv"), &trace_csv(cfg, &report))?;
    let mut snapshot = f.to_json();
    snapshot["config_hash"] = serde_json::json!(cfg.config_hash);
    io::write_json(&out.join("solution3d.json"), &snapshot)?;
    let u3 = slice_average(&mesh, &f, Component::U3);
    let alpha = slice_average(&mesh, &f, Component::Alpha);
    io::write_text(
        &out.join("profile3d.csv"),
        &profile_csv(cfg, &mesh.z, &u3, &alpha),
    )?;
    eprintln!(
        "solve3d (delta = {delta}): energy {:.6e}, {} outer iterations, converged = {} ({:.2}s)",
        energy.total, report.outer_iterations, report.converged, report.wallclock_s
    );
    if report.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Error::NonConvergence {
            solver: "alternate minimization (3d)",
            residual: report.alpha_update_inf,
            iterations: report.outer_iterations,
        })
    }
}

fn cmd_recovery(cfg: &RunConfig, out: &Path) -> Result<ExitCode, Error> {
    let law = cfg.build_law()?;
    let mesh = build_cylinder(cfg.mesh.nxy, cfg.mesh.nz)?;
    let mesh1d = build_interval(cfg.mesh.nz1d)?;
    let mut g = kinked_profile(
        &mesh1d,
        cfg.material.eps_z,
        cfg.recovery.kink_z,
        cfg.recovery.kink_u,
    );
    g.alphabar.fill(cfg.recovery.alpha);
    let rows = recovery_sweep(
        &cfg.material,
        &law,
        &mesh,
        &mesh1d,
        &g,
        &cfg.recovery.deltas,
    )?;
    let mut csv = format!(
        "# config_hash={}\ndelta,k,energy_3d,energy_1d,gap,extra_term,deriv_inf\n",
        cfg.config_hash
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(r.delta),
            r.k,
            fmt_f64(r.energy_3d),
            fmt_f64(r.energy_1d),
            fmt_f64(r.gap),
            fmt_f64(r.extra_term),
            fmt_f64(r.deriv_inf)
        ));
    }
    io::write_text(&out.join("recovery.csv"), &csv)?;
    let gap_series = Series {
        name: "energy gap".into(),
        points: rows.iter().map(|r| (r.delta, r.gap.max(0.0))).collect(),
    };
    let bound_series = Series {
        name: "extra shear term".into(),
        points: rows.iter().map(|r| (r.delta, r.extra_term)).collect(),
    };
    io::write_text(
        &out.join("recovery_gap.svg"),
        &io::loglog_svg(
            "Recovery energy gap vs aspect ratio",
            "delta",
            "gap",
            &[gap_series, bound_series],
            &cfg.config_hash,
        ),
    )?;
    for r in &rows {
        eprintln!(
            "recovery delta = {:<6} k = {:<3} gap = {:.6e} extra = {:.6e}",
            r.delta, r.k, r.gap, r.extra_term
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gamma_study(cfg: &RunConfig, out: &Path) -> Result<ExitCode, Error> {
    let law = cfg.build_law()?;
    let opts = cfg.study_options();
    let (records, summary, report1d) = gamma_sweep(&cfg.material, &law, &cfg.solver, &opts)?;

    let mut csv = format!(
        "# config_hash={}\n{}\n",
        cfg.config_hash,
        rodamage_core::study::StudyRecord::csv_header()
    );
    for r in &records {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    io::write_text(&out.join("study.csv"), &csv)?;
    io::write_json(
        &out.join("study.json"),
        &serde_json::json!({
            "config_hash": cfg.config_hash,
            "records": records,
            "summary": summary,
            "report1d": report1d,
        }),
    )?;
    let gap = Series {
        name: "|E3d - E1d|".into(),
        points: records.iter().map(|r| (r.delta, r.gap.abs())).collect(),
    };
    io::write_text(
        &out.join("gap_vs_delta.svg"),
        &io::loglog_svg(
            "Energy gap vs aspect ratio",
            "delta",
            "gap",
            &[gap],
            &cfg.config_hash,
        ),
    )?;
    type Getter = fn(&rodamage_core::study::StudyRecord) -> f64;
    let picks: [(&str, Getter); 4] = [
        ("shear", |r| r.diag.shear),
        ("alpha transverse", |r| r.diag.alpha_transverse),
        ("poisson x", |r| r.diag.poisson_x),
        ("u3", |r| r.diag.u3),
    ];
    let series: Vec<Series> = picks
        .into_iter()
        .map(|(name, get)| Series {
            name: name.into(),
            points: records.iter().map(|r| (r.delta, get(r))).collect(),
        })
        .collect();
    io::write_text(
        &out.join("residuals_vs_delta.svg"),
        &io::loglog_svg(
            "Uniaxial-limit residuals vs aspect ratio",
            "delta",
            "residual",
            &series,
            &cfg.config_hash,
        ),
    )?;
    for r in &records {
        eprintln!(
            "delta = {:<6} E3d = {:.8e} E1d = {:.8e} gap = {:+.3e} shear = {:.3e} converged = {}",
            r.delta, r.e3d_min, r.e1d_min, r.gap, r.diag.shear, r.converged
        );
    }
    eprintln!(
        "summary: gap_nonincreasing = {}, residuals_nonincreasing = {}, bound_ok = {}, converged = {}/{}",
        summary.gap_nonincreasing,
        summary.residuals_nonincreasing,
        summary.transverse_bound_ok,
        summary.converged_records,
        records.len()
    );
    if summary.converged_records == records.len() {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Error::NonConvergence {
            solver: "gamma study (some 3d solves)",
            residual: f64::NAN,
            iterations: records.len() - summary.converged_records,
        })
    }
}

fn cmd_validate(cfg: &RunConfig) -> Result<ExitCode, Error> {
    let law = cfg.build_law()?;
    let report = run_checks(&cfg.material, &law, cfg.solver.seed)?;
    for c in &report.checks {
        println!(
            "{:<32} {:>12.3e}  (tolerance {:>8.1e})  {}",
            c.name,
            c.value,
            c.tolerance,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    if report.all_pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
