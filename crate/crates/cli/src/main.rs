//! `convint`: batch driver for the convex-integration pipeline.
//!
//! Every subcommand reads the TOML config and works inside the output
//! directory, so phases can be rerun one at a time from artifacts on disk.
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use convint::pipeline::{self, RunConfig, M_FINAL, U_FINAL};
use convint::subsolution::Check;
use convint::tolerances::ALGEBRAIC;

#[derive(Parser)]
#[command(name = "convint", version, about = "Convex-integration subsolutions on the periodic torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured number of improvement steps.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary subsolution, flat trace and time reflection.
    Subsolution(Common),
    /// Improvement steps from the step-0 dumps or a resume dump.
    Iterate {
        #[command(flatten)]
        common: Common,
        /// Momentum dump `m_stepNNNN.wfld` to continue from.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Energy certification of the final state.
    Admissibility(Common),
    /// Recompute the residual table from dumps.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Momentum dump (default: the final one).
        #[arg(long)]
        momentum: Option<PathBuf>,
        /// Stress dump (default: the final one).
        #[arg(long)]
        stress: Option<PathBuf>,
    },
    /// Assemble report.json from the stage artifacts.
    Report(Common),
    /// All phases in order.
    Run(Common),
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&common.config)
        .with_context(|| format!("reading config {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(steps) = common.steps {
        cfg.iteration.steps = steps;
    }
    let dir = pipeline::output_dir(&cfg, common.out.as_deref());
    Ok((cfg, dir))
}

fn print_checks(checks: &[Check]) -> bool {
    for c in checks {
        let relation = if c.upper { "<=" } else { ">" };
        println!(
            "{} {:<20} {:.6e} {relation} {:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    checks.iter().all(|c| c.pass)
}

fn admissibility_checks(cfg: &RunConfig, stage: &pipeline::AdmissibilityStage) -> Vec<Check> {
    let tol = &cfg.tolerances;
    vec![
        Check::upper("energy", stage.energy_worst, tol.energy),
        Check::upper("energy_full", stage.energy_full_worst, tol.energy),
        Check::upper("pointwise_bound", stage.pointwise_excess, ALGEBRAIC),
        Check::upper("chi_cross", stage.chi_cross, tol.chi_cross),
        Check::lower("t_bar", stage.t_bar, 0.0),
    ]
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Subsolution(common) => {
            let (cfg, dir) = load(&common)?;
            let (stage, state) = pipeline::run_subsolution(&cfg, &dir)?;
            println!(
                "sign {} lambda {:.6e} chi {:.6e} residual {:.3e}",
                stage.sign_branch, stage.lambda_tilde, stage.chi_tilde, stage.stationary_residual
            );
            Ok(print_checks(&state.invariants()?.checks))
        }
        Command::Iterate { common, resume } => {
            let (cfg, dir) = load(&common)?;
            let (stage, _) = pipeline::run_iterate(&cfg, &dir, resume.as_deref())?;
            for r in &stage.records {
                println!(
                    "step {:>4} deficit {:.6e} gain {:.3e} k {} margin {:.3e}",
                    r.step, r.deficit_after, r.l2_gain, r.k_used, r.hint_margin_min
                );
            }
            Ok(true)
        }
        Command::Admissibility(common) => {
            let (cfg, dir) = load(&common)?;
            let stage = pipeline::run_admissibility(&cfg, &dir)?;
            println!("t_bar {:.6e} certified on [0, {:.6e}]", stage.t_bar, stage.certification_end);
            Ok(print_checks(&admissibility_checks(&cfg, &stage)))
        }
        Command::Validate {
            common,
            momentum,
            stress,
        } => {
            let (cfg, dir) = load(&common)?;
            let m = momentum.unwrap_or_else(|| dir.join(M_FINAL));
            let u = stress.unwrap_or_else(|| dir.join(U_FINAL));
            let report = pipeline::validate_dumps(&cfg, &dir, &m, &u)?;
            let mut ok = print_checks(&report.residuals);
            if let Some(d) = report.max_deviation {
                ok &= print_checks(&[Check::upper("replay", d, report.tolerance)]);
            }
            Ok(ok && report.all_pass)
        }
        Command::Report(common) => {
            let (cfg, dir) = load(&common)?;
            let report = pipeline::report(&cfg, &dir)?;
            Ok(print_checks(&report.checks) && report.all_pass)
        }
        Command::Run(common) => {
            let (cfg, dir) = load(&common)?;
            let report = pipeline::run(&cfg, &dir)?;
            println!("output {}", dir.display());
            Ok(print_checks(&report.checks) && report.all_pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
