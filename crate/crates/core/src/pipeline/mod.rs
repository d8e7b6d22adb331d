//! Batch orchestration: stationary subsolution, flat trace and time
//! reflection, improvement iterates, admissibility certification and the
//! residual table, each stage reading and writing artifacts in one
//! output directory.
//!
//! Artifacts:
//! - `rho0.wfld`, `m_stepNNNN.wfld`, `u_stepNNNN.wfld`, `m_final.wfld`,
//!   `u_final.wfld`: field dumps (see [`crate::torus::dump`]).
//! - `steps.csv`: one row per improvement step.
//! - `subsolution.json`, `iterate.json`, `admissibility.json`,
//!   `validation.json`, `report.json`: stage summaries and the run report.

mod config;

pub use config::{
    AdmissibilityConfig, ChiConfig, DensityConfig, DensityMode, GridConfig, IterationConfig, OutputConfig,
    RunConfig, Tolerances,
};

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::admissibility::{
    certification_times, chi_solve, chi_solve_rk4, compute_constants, energy_residual, maximal_time,
    nonneg_tests, pointwise_bound_excess, saturated_family, AdmissibilityConstants, ChiBranch,
};
use crate::error::{Error, Result};
use crate::oscillation::{iterate_with, GainReport, STEPS_CSV_HEADER, STEPS_CSV_VERSION};
use crate::subsolution::{
    approximate_flat_subsolution, build_stationary_subsolution, choose_chi, fit_beta, time_symmetric_data, Check,
    StationarySubsolution, SubsolutionState,
};
use crate::tolerances::ALGEBRAIC;
use crate::torus::dump::{self, read_family, write_family, write_field};
use crate::torus::{FieldFamily, FieldKind};

pub const REPORT_VERSION: u32 = 1;

pub const RHO0_DUMP: &str = "rho0.wfld";
pub const M_FINAL: &str = "m_final.wfld";
pub const U_FINAL: &str = "u_final.wfld";
pub const STEPS_CSV: &str = "steps.csv";
pub const SUBSOLUTION_JSON: &str = "subsolution.json";
pub const ITERATE_JSON: &str = "iterate.json";
pub const ADMISSIBILITY_JSON: &str = "admissibility.json";
pub const VALIDATION_JSON: &str = "validation.json";
pub const REPORT_JSON: &str = "report.json";

const ENERGY_TEST_SEED: u64 = 0xe6e7;

pub fn momentum_dump(step: usize) -> String {
    format!("m_step{step:04}.wfld")
}

pub fn stress_dump(step: usize) -> String {
    format!("u_step{step:04}.wfld")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatSummary {
    pub deficits: Vec<f64>,
    pub local_deficits: Vec<f64>,
    pub beta_impl: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionStage {
    pub sign_branch: i8,
    pub lambda_tilde: f64,
    pub chi_tilde: f64,
    pub stationary_residual: f64,
    pub rejected_residual: f64,
    pub flat: FlatSummary,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub deficit_before: f64,
    pub deficit_after: f64,
    pub l2_gain: f64,
    pub k_used: u32,
    pub hint_margin_min: f64,
    pub weak_drift: f64,
    pub predicted_gain: f64,
    pub f_impl: f64,
    pub halvings: u32,
    pub balls: usize,
    pub covered: f64,
    pub required: f64,
}

impl StepRecord {
    fn new(step: usize, r: &GainReport) -> Self {
        StepRecord {
            step,
            deficit_before: r.deficit_before,
            deficit_after: r.deficit_after,
            l2_gain: r.l2_gain,
            k_used: r.k_used,
            hint_margin_min: r.hint_margin_min,
            weak_drift: r.weak_drift,
            predicted_gain: r.predicted_gain,
            f_impl: r.f_impl,
            halvings: r.halvings,
            balls: r.balls.len(),
            covered: r.covered,
            required: r.required,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateStage {
    pub records: Vec<StepRecord>,
    /// `D_0, D_1, …` over the whole evolution window.
    pub deficits: Vec<f64>,
    /// Smallest length ratio over all steps that placed waves.
    pub f_impl: Option<f64>,
    pub beta_impl: Option<f64>,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityStage {
    pub constants: AdmissibilityConstants,
    pub chi_branch: ChiBranch,
    /// `n λ̃`, the level `χ` must stay above.
    pub threshold: f64,
    pub t_bar: f64,
    /// End of the certified window `[0, min(T̄, T)]`.
    pub certification_end: f64,
    /// `max |χ_closed − χ_rk4| / χ₀` over the certification samples.
    pub chi_cross: f64,
    pub energy_worst: f64,
    pub energy_full_worst: f64,
    pub pointwise_excess: f64,
    pub tests: usize,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub subsolution: f64,
    pub iterate: f64,
    pub admissibility: f64,
    pub validation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub report_version: u32,
    pub crate_version: String,
    pub steps_csv_version: u32,
    pub dump_version: u32,
    pub seed: u64,
    pub sign_branch: i8,
    pub lambda_tilde: f64,
    pub chi_tilde: f64,
    pub t_bar: f64,
    pub certification_end: f64,
    pub constants: AdmissibilityConstants,
    pub chi_branch: ChiBranch,
    pub f_impl: Option<f64>,
    pub beta_impl: Option<f64>,
    pub deficits: Vec<f64>,
    pub flat: FlatSummary,
    /// Recomputable from the final dumps alone.
    pub residuals: Vec<Check>,
    /// Residuals plus run-level checks.
    pub checks: Vec<Check>,
    pub all_pass: bool,
    pub timings: Timings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub residuals: Vec<Check>,
    /// Largest deviation from the report's residual table, if one exists.
    pub max_deviation: Option<f64>,
    pub tolerance: f64,
    pub all_pass: bool,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn elapsed(cfg: &RunConfig, started: Instant) -> f64 {
    if cfg.output.record_wall_time {
        started.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

/// Stationary subsolution, flat trace on `[−T, T]` and time reflection
/// onto `[0, 2T]`; writes `rho0`, step-0 dumps and `subsolution.json`.
pub fn run_subsolution(cfg: &RunConfig, dir: &Path) -> Result<(SubsolutionStage, SubsolutionState)> {
    let started = Instant::now();
    fs::create_dir_all(dir)?;
    let rho0 = cfg.density_field()?;
    let stat = build_stationary_subsolution(&rho0, &cfg.pressure)?;
    let chi = choose_chi(stat.lambda_tilde, cfg.grid.n, cfg.chi.margin, cfg.chi.floor)?;
    let (flat, flat_report) = approximate_flat_subsolution(
        &stat,
        chi,
        cfg.grid_spec()?,
        cfg.iteration.flat_steps,
        &cfg.improvement,
        cfg.seed,
    )?;
    let state = time_symmetric_data(&flat)?;
    state.check_invariants()?;
    write_field(&dir.join(RHO0_DUMP), &rho0)?;
    write_family(&dir.join(momentum_dump(0)), &state.m)?;
    write_family(&dir.join(stress_dump(0)), &state.u)?;
    let stage = SubsolutionStage {
        sign_branch: stat.sign_branch,
        lambda_tilde: stat.lambda_tilde,
        chi_tilde: chi,
        stationary_residual: stat.residual,
        rejected_residual: stat.rejected_residual,
        flat: FlatSummary {
            deficits: flat_report.deficits,
            local_deficits: flat_report.local_deficits,
            beta_impl: flat_report.beta_impl,
        },
        wall_time: elapsed(cfg, started),
    };
    write_json(&dir.join(SUBSOLUTION_JSON), &stage)?;
    Ok((stage, state))
}

/// Rebuild a state from dumps: the density dump, the configuration and
/// the given momentum and stress families.
pub fn load_state(cfg: &RunConfig, dir: &Path, m_path: &Path, u_path: &Path) -> Result<(SubsolutionState, StationarySubsolution)> {
    let rho_family = read_family(&dir.join(RHO0_DUMP))?;
    let rho0 = rho_family.slices.into_iter().next().expect("dump has a slice");
    let grid = cfg.grid_spec()?;
    if rho0.grid() != grid.space || rho0.kind() != FieldKind::Scalar {
        return Err(Error::GridMismatch("density dump does not match the configured grid".into()));
    }
    let stat = build_stationary_subsolution(&rho0, &cfg.pressure)?;
    let chi = choose_chi(stat.lambda_tilde, cfg.grid.n, cfg.chi.margin, cfg.chi.floor)?;
    let m = read_family(m_path)?;
    let u = read_family(u_path)?;
    let check = |f: &FieldFamily, kind: FieldKind, what: &str| {
        if f.grid() != grid.space || f.kind() != kind {
            return Err(Error::GridMismatch(format!("{what} dump does not match the configured grid")));
        }
        Ok(())
    };
    check(&m, FieldKind::Vector, "momentum")?;
    check(&u, FieldKind::SymMatrix, "stress")?;
    if m.times != u.times {
        return Err(Error::GridMismatch("momentum and stress dumps have different times".into()));
    }
    let state = SubsolutionState {
        grid,
        rho0,
        pressure: stat.pressure.clone(),
        chi,
        m,
        u,
    };
    Ok((state, stat))
}

/// Step number encoded in a `m_stepNNNN.wfld` name.
fn resume_step(path: &Path) -> Result<usize> {
    path.file_name()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("m_step"))
        .and_then(|s| s.strip_suffix(".wfld"))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::config("resume", format!("{} is not an m_stepNNNN.wfld dump", path.display())))
}

/// Improvement iterates over the whole window, starting from the step-0
/// dumps or from `resume`; writes `steps.csv`, dumps and `iterate.json`.
pub fn run_iterate(
    cfg: &RunConfig,
    dir: &Path,
    resume: Option<&Path>,
) -> Result<(IterateStage, SubsolutionState)> {
    let (m_path, start) = match resume {
        Some(p) => (p.to_path_buf(), resume_step(p)?),
        None => (dir.join(momentum_dump(0)), 0),
    };
    let u_path = m_path.with_file_name(stress_dump(start));
    let (state, _) = load_state(cfg, dir, &m_path, &u_path)?;
    iterate_from(cfg, dir, state, start)
}

fn iterate_from(cfg: &RunConfig, dir: &Path, state: SubsolutionState, start: usize) -> Result<(IterateStage, SubsolutionState)> {
    let started = Instant::now();
    let (mut records, mut deficits) = if start > 0 {
        let previous: IterateStage = read_json(&dir.join(ITERATE_JSON))?;
        let records: Vec<StepRecord> = previous.records.into_iter().filter(|r| r.step <= start).collect();
        let mut deficits = previous.deficits;
        deficits.truncate(start + 1);
        (records, deficits)
    } else {
        (Vec::new(), vec![state.deficit()])
    };
    if deficits.len() != start + 1 {
        return Err(Error::config("resume", format!("iterate.json has no record of step {start}")));
    }

    let csv_path = dir.join(STEPS_CSV);
    let mut csv = if start == 0 || !csv_path.exists() {
        let mut f = BufWriter::new(File::create(&csv_path)?);
        writeln!(f, "{STEPS_CSV_HEADER}")?;
        f
    } else {
        let kept: Vec<String> = fs::read_to_string(&csv_path)?
            .lines()
            .take(start + 1)
            .map(str::to_owned)
            .collect();
        let mut f = BufWriter::new(OpenOptions::new().write(true).truncate(true).open(&csv_path)?);
        for line in kept {
            writeln!(f, "{line}")?;
        }
        f
    };

    let (last, _) = iterate_with(
        &state,
        cfg.iteration.steps,
        &cfg.improvement,
        cfg.seed.wrapping_add(start as u64),
        |i, next, report| {
            let step = start + i;
            writeln!(csv, "{}", report.csv_row(step, cfg.output.record_wall_time))?;
            records.push(StepRecord::new(step, report));
            deficits.push(report.deficit_after);
            if cfg.iteration.dump_steps.contains(&step) {
                write_family(&dir.join(momentum_dump(step)), &next.m)?;
                write_family(&dir.join(stress_dump(step)), &next.u)?;
            }
            Ok(())
        },
    )?;
    csv.flush()?;
    write_family(&dir.join(M_FINAL), &last.m)?;
    write_family(&dir.join(U_FINAL), &last.u)?;
    let f_impl = records
        .iter()
        .filter(|r| r.balls > 0)
        .map(|r| r.f_impl)
        .reduce(f64::min);
    let stage = IterateStage {
        beta_impl: fit_beta(&deficits),
        records,
        deficits,
        f_impl,
        wall_time: elapsed(cfg, started),
    };
    write_json(&dir.join(ITERATE_JSON), &stage)?;
    Ok((stage, last))
}

/// Energy certification of the saturated projection of `state` on
/// `[0, min(T̄, T)]`, with `χ` from the closed-form profile.
pub fn certify(cfg: &RunConfig, state: &SubsolutionState, lambda_tilde: f64) -> Result<AdmissibilityStage> {
    let started = Instant::now();
    let constants = compute_constants(&state.rho0, &cfg.pressure)?;
    let horizon = cfg.grid.horizon;
    let profile = chi_solve(state.chi, &constants, horizon)?;
    let threshold = cfg.grid.n as f64 * lambda_tilde;
    let t_bar = maximal_time(&profile, threshold)?;
    let end = t_bar.min(horizon);
    let times = certification_times(end, cfg.admissibility.time_samples);

    let rk4 = chi_solve_rk4(state.chi, &constants, horizon, cfg.admissibility.rk4_step)?;
    let chi_cross = times
        .iter()
        .map(|&t| (profile.chi(t) - rk4.chi(t)).abs() / state.chi)
        .fold(0.0, f64::max);

    let directions = &state.m.slices[0];
    let saturated = saturated_family(&state.rho0, directions, &profile, &times);
    let tests = nonneg_tests(cfg.grid.n, 0.0, end, cfg.admissibility.tests, ENERGY_TEST_SEED);
    let energy = energy_residual(&state.rho0, &saturated, &profile, &cfg.pressure, &tests)?;
    let excess = pointwise_bound_excess(&state.rho0, &saturated, &profile, &cfg.pressure, &constants)?;
    Ok(AdmissibilityStage {
        constants,
        chi_branch: profile.branch,
        threshold,
        t_bar,
        certification_end: end,
        chi_cross,
        energy_worst: energy.worst,
        energy_full_worst: energy.worst_full,
        pointwise_excess: excess,
        tests: tests.len(),
        wall_time: elapsed(cfg, started),
    })
}

pub fn load_final(cfg: &RunConfig, dir: &Path) -> Result<(SubsolutionState, StationarySubsolution)> {
    load_state(cfg, dir, &dir.join(M_FINAL), &dir.join(U_FINAL))
}

/// Certification from the final dumps; writes `admissibility.json`.
pub fn run_admissibility(cfg: &RunConfig, dir: &Path) -> Result<AdmissibilityStage> {
    let (state, stat) = load_final(cfg, dir)?;
    let stage = certify(cfg, &state, stat.lambda_tilde)?;
    write_json(&dir.join(ADMISSIBILITY_JSON), &stage)?;
    Ok(stage)
}

/// Every residual that can be recomputed from a state alone.
pub fn residual_table(
    cfg: &RunConfig,
    state: &SubsolutionState,
    stat: &StationarySubsolution,
    adm: &AdmissibilityStage,
) -> Result<Vec<Check>> {
    let tol = &cfg.tolerances;
    let invariants = state.invariants()?;
    let mut checks = vec![Check::upper("stationary_residual", stat.residual, tol.divergence)];
    for c in invariants.checks {
        checks.push(match c.name.as_str() {
            "divergence" => Check::upper("divergence", c.value, tol.divergence),
            "weak_momentum" => Check::upper("weak_momentum", c.value, tol.weak_momentum),
            _ => c,
        });
    }
    checks.extend([
        Check::upper("energy", adm.energy_worst, tol.energy),
        Check::upper("energy_full", adm.energy_full_worst, tol.energy),
        Check::upper("pointwise_bound", adm.pointwise_excess, ALGEBRAIC),
        Check::upper("chi_cross", adm.chi_cross, tol.chi_cross),
        Check::lower("t_bar", adm.t_bar, 0.0),
    ]);
    Ok(checks)
}

fn max_deviation(a: &[Check], b: &[Check]) -> f64 {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.name != y.name) {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if x.value == y.value {
                0.0
            } else {
                (x.value - y.value).abs() / x.value.abs().max(1.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Recompute the residual table from the final dumps and compare it with
/// `report.json` when present; writes `validation.json`.
pub fn validate(cfg: &RunConfig, dir: &Path) -> Result<ValidationReport> {
    validate_dumps(cfg, dir, &dir.join(M_FINAL), &dir.join(U_FINAL))
}

pub fn validate_dumps(cfg: &RunConfig, dir: &Path, m_path: &Path, u_path: &Path) -> Result<ValidationReport> {
    let (state, stat) = load_state(cfg, dir, m_path, u_path)?;
    let adm = certify(cfg, &state, stat.lambda_tilde)?;
    let residuals = residual_table(cfg, &state, &stat, &adm)?;
    let report_path = dir.join(REPORT_JSON);
    let reference = if report_path.exists() {
        Some(read_json::<RunReport>(&report_path)?.residuals)
    } else {
        None
    };
    let report = validation_report(cfg, residuals, reference.as_deref());
    write_json(&dir.join(VALIDATION_JSON), &report)?;
    Ok(report)
}

fn validation_report(cfg: &RunConfig, residuals: Vec<Check>, reference: Option<&[Check]>) -> ValidationReport {
    let max_deviation = reference.map(|r| max_deviation(r, &residuals));
    let tolerance = cfg.tolerances.replay;
    let all_pass = residuals.iter().all(|c| c.pass) && max_deviation.is_none_or(|d| d <= tolerance);
    ValidationReport {
        residuals,
        max_deviation,
        tolerance,
        all_pass,
    }
}

fn assemble(
    cfg: &RunConfig,
    sub: &SubsolutionStage,
    it: &IterateStage,
    adm: &AdmissibilityStage,
    residuals: Vec<Check>,
    validation: Option<&ValidationReport>,
    validation_time: f64,
) -> RunReport {
    let mut checks = residuals.clone();
    let worst_increase = it
        .deficits
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::upper("deficit_monotone", worst_increase.max(0.0), 0.0));
    if let Some(v) = validation {
        checks.push(Check::upper("replay", v.max_deviation.unwrap_or(0.0), v.tolerance));
    }
    let all_pass = checks.iter().all(|c| c.pass);
    RunReport {
        report_version: REPORT_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        steps_csv_version: STEPS_CSV_VERSION,
        dump_version: dump::VERSION,
        seed: cfg.seed,
        sign_branch: sub.sign_branch,
        lambda_tilde: sub.lambda_tilde,
        chi_tilde: sub.chi_tilde,
        t_bar: adm.t_bar,
        certification_end: adm.certification_end,
        constants: adm.constants,
        chi_branch: adm.chi_branch,
        f_impl: it.f_impl,
        beta_impl: it.beta_impl,
        deficits: it.deficits.clone(),
        flat: sub.flat.clone(),
        residuals,
        checks,
        all_pass,
        timings: Timings {
            subsolution: sub.wall_time,
            iterate: it.wall_time,
            admissibility: adm.wall_time,
            validation: validation_time,
        },
    }
}

/// Assemble `report.json` from the stage summaries on disk and the
/// residual table of the final dumps.
pub fn report(cfg: &RunConfig, dir: &Path) -> Result<RunReport> {
    let sub: SubsolutionStage = read_json(&dir.join(SUBSOLUTION_JSON))?;
    let it: IterateStage = read_json(&dir.join(ITERATE_JSON))?;
    let (state, stat) = load_final(cfg, dir)?;
    let adm = certify(cfg, &state, stat.lambda_tilde)?;
    write_json(&dir.join(ADMISSIBILITY_JSON), &adm)?;
    let residuals = residual_table(cfg, &state, &stat, &adm)?;
    let report = assemble(cfg, &sub, &it, &adm, residuals, None, 0.0);
    write_json(&dir.join(REPORT_JSON), &report)?;
    Ok(report)
}

/// The whole pipeline into `dir`; the report includes the replay of the
/// residual table from the final dumps.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunReport> {
    let (sub, state) = run_subsolution(cfg, dir)?;
    let (it, last) = iterate_from(cfg, dir, state, 0)?;
    let stat = build_stationary_subsolution(&last.rho0, &cfg.pressure)?;
    let adm = certify(cfg, &last, stat.lambda_tilde)?;
    write_json(&dir.join(ADMISSIBILITY_JSON), &adm)?;
    let residuals = residual_table(cfg, &last, &stat, &adm)?;

    let started = Instant::now();
    let (replayed_state, replayed_stat) = load_final(cfg, dir)?;
    let replayed_adm = certify(cfg, &replayed_state, replayed_stat.lambda_tilde)?;
    let replayed = residual_table(cfg, &replayed_state, &replayed_stat, &replayed_adm)?;
    let validation = validation_report(cfg, replayed, Some(&residuals));
    write_json(&dir.join(VALIDATION_JSON), &validation)?;
    let report = assemble(cfg, &sub, &it, &adm, residuals, Some(&validation), elapsed(cfg, started));
    write_json(&dir.join(REPORT_JSON), &report)?;
    Ok(report)
}

/// Output directory: the override when given, else the configured one.
pub fn output_dir(cfg: &RunConfig, over: Option<&Path>) -> PathBuf {
    over.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone())
}
