//! One improvement step: cover, pick a wave per ball, search the frequency,
//! verify, and report the gain.

use std::f64::consts::PI;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cover::{ball_cover, Ball, CoverOptions, Target};
use super::potential::{potential_operator, OperatorSpec};
use super::wave::{ball_points, spectral_perturbation, LocalizedWave, SpectralAssembler, WaveSpec};
use crate::error::{Error, Result};
use crate::geometry::{candidate_generators, e_unchecked, special_direction, symmetric_extent, ConstraintParams, StateTriple};
use crate::subsolution::SubsolutionState;
use crate::torus::weak::{standard_vector_tests, weak_pairing};
use crate::torus::{periodic_delta, trapezoid_weights, FieldFamily};

/// Version of the per-step CSV layout.
pub const STEPS_CSV_VERSION: u32 = 1;
pub const STEPS_CSV_HEADER: &str = "step,deficit,gain,k_used,hint_margin_min,weak_drift,wall_time";

const AMPLITUDE_CAP: f64 = 4.0;
const PROBE_SEED: u64 = 0x9e37_79b9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImprovementOptions {
    /// Largest cover radius `s`.
    pub cover_radius: f64,
    pub cover_levels: u32,
    pub max_balls: usize,
    /// Time radius over space radius for space-time targets.
    pub time_ratio: f64,
    pub k_min: u32,
    /// Regularity of the cutoff smoothstep.
    pub smoothness: u32,
    /// Generator pairs line-searched per ball.
    pub candidates: usize,
    /// Random pairs added to the ranked generator pool.
    pub random_pairs: usize,
    /// Fraction of the largest admissible amplitude actually used.
    pub amplitude_fraction: f64,
    /// Halvings of the violating waves per frequency; twice as many global halvings follow.
    pub retries: u32,
    pub probe_tests: usize,
}

impl Default for ImprovementOptions {
    fn default() -> Self {
        ImprovementOptions {
            cover_radius: 0.22,
            cover_levels: 3,
            max_balls: 64,
            time_ratio: 0.5,
            k_min: 64,
            smoothness: 6,
            candidates: 4,
            random_pairs: 8,
            amplitude_fraction: 0.75,
            retries: 4,
            probe_tests: 8,
        }
    }
}

impl ImprovementOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.cover_radius > 0.0 && self.cover_radius < 0.5) {
            return Err(Error::config("improvement.cover_radius", "must lie in (0, 0.5)"));
        }
        if !(self.time_ratio > 0.0) {
            return Err(Error::config("improvement.time_ratio", "must be positive"));
        }
        if self.k_min == 0 {
            return Err(Error::config("improvement.k_min", "must be positive"));
        }
        if self.smoothness < 3 {
            return Err(Error::config("improvement.smoothness", "must be at least 3"));
        }
        if self.candidates == 0 || self.max_balls == 0 {
            return Err(Error::config("improvement.candidates", "must be positive"));
        }
        if !(self.amplitude_fraction > 0.0 && self.amplitude_fraction < 1.0) {
            return Err(Error::config("improvement.amplitude_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Largest frequency whose per-axis wavenumber stays below `N/4`.
    pub fn frequency_cap(points: usize) -> u32 {
        (PI * points as f64 / 2.0).floor() as u32
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallReport {
    pub center: Vec<f64>,
    pub time: f64,
    pub radius: f64,
    pub time_radius: f64,
    pub gap: f64,
    pub amplitude: f64,
    /// `|a (c − d)|`.
    pub momentum_amplitude: f64,
    /// `|a (c − d)| √(ρχ) / (ρχ − |m|²)` at the centre.
    pub length_ratio: f64,
    pub predicted_gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub l2_gain: f64,
    pub deficit_before: f64,
    pub deficit_after: f64,
    pub k_used: u32,
    pub hint_margin_min: f64,
    pub weak_drift: f64,
    pub predicted_gain: f64,
    /// Smallest length ratio over the cover.
    pub f_impl: f64,
    pub covered: f64,
    pub required: f64,
    pub halvings: u32,
    pub balls: Vec<BallReport>,
    pub wall_time: f64,
}

impl GainReport {
    pub fn csv_row(&self, step: usize, record_wall_time: bool) -> String {
        let wall = if record_wall_time { self.wall_time } else { 0.0 };
        format!(
            "{step},{:e},{:e},{},{:e},{:e},{:e}",
            self.deficit_after, self.l2_gain, self.k_used, self.hint_margin_min, self.weak_drift, wall
        )
    }
}

fn target_deficit(state: &SubsolutionState, target: &Target) -> f64 {
    match *target {
        Target::SpaceTime { t0, t1 } => {
            let len = state.grid.space.len() as f64;
            let idx: Vec<usize> = (0..state.times().len())
                .filter(|&j| state.times()[j] >= t0 - 1e-12 && state.times()[j] <= t1 + 1e-12)
                .collect();
            let ts: Vec<f64> = idx.iter().map(|&j| state.times()[j]).collect();
            trapezoid_weights(&ts)
                .iter()
                .zip(&idx)
                .map(|(w, &j)| w * state.gap_slice(j).iter().sum::<f64>() / len)
                .sum()
        }
        Target::Slice { .. } => state.slice_deficit(state.time_index(0.0), None),
    }
}

struct BallWork {
    ball: Ball,
    params: ConstraintParams,
    center_state: StateTriple,
    ops: Vec<OperatorSpec>,
    /// `(point, time index, gain weight)`, grouped by time index.
    points: Vec<(usize, usize, f64)>,
}

fn state_at(state: &SubsolutionState, p: usize, j: usize) -> StateTriple {
    StateTriple {
        m: state.m.slices[j].vector(p),
        u: state.u.slices[j].matrix(p),
        q: 0.0,
    }
}

fn prepare_ball(
    state: &SubsolutionState,
    target: &Target,
    ball: Ball,
    opts: &ImprovementOptions,
    rng: &mut ChaCha8Rng,
) -> Result<BallWork> {
    let grid = state.grid.space;
    let rho = state.rho0.scalar(ball.point);
    let params = ConstraintParams::new(rho, state.chi)?;
    let z = state_at(state, ball.point, ball.time_index);
    let radius = params.momentum_bound().sqrt();
    let mut pool: Vec<(f64, (crate::linalg::Vector, crate::linalg::Vector))> =
        candidate_generators(&params, &z, opts.random_pairs, rng)
            .into_iter()
            .filter(|(c, d)| (*c - *d).norm() > 1e-6 * radius)
            .filter_map(|(c, d)| {
                let dir = special_direction(&c, &d, rho).ok()?;
                Some((symmetric_extent(&params, &z, &dir) * dir.m.norm(), (c, d)))
            })
            .collect();
    pool.sort_by(|a, b| b.0.total_cmp(&a.0));
    let ops = pool
        .into_iter()
        .take(opts.candidates)
        .map(|(_, (c, d))| potential_operator(&c, &d, rho))
        .collect::<Result<Vec<_>>>()?;

    let dx = grid.spacing().powi(grid.n as i32);
    let weights = trapezoid_weights(state.times());
    let zero = state.time_index(0.0);
    let mut points = Vec::new();
    for (j, &t) in state.times().iter().enumerate() {
        let s = (t - ball.time) / ball.time_radius;
        if s.abs() >= 1.0 {
            continue;
        }
        // a two-cell rim also catches the spectral tails of the wave
        let r = ball.radius * (1.0 - s * s).sqrt() + 2.0 * grid.spacing();
        let w = match target {
            Target::SpaceTime { .. } => dx * weights[j],
            Target::Slice { .. } => {
                if j == zero {
                    dx
                } else {
                    0.0
                }
            }
        };
        points.extend(ball_points(grid, &ball.center, r).into_iter().map(|p| (p, j, w)));
    }
    Ok(BallWork {
        ball,
        params,
        center_state: z,
        ops,
        points,
    })
}

struct Choice {
    wave: LocalizedWave,
    predicted: f64,
}

/// Largest `a ≤ cap` keeping `z + a·w` at or below `level` at every point.
fn line_search(
    state: &SubsolutionState,
    points: &[(usize, usize, f64)],
    waves: &[StateTriple],
    sign: f64,
    level: f64,
) -> f64 {
    let mut a = AMPLITUDE_CAP;
    for (&(p, j, _), w) in points.iter().zip(waves) {
        let z = state_at(state, p, j);
        let rho = state.rho0.scalar(p);
        let e = |s: f64| e_unchecked(rho, &(z.m + w.m * (sign * s)), &(z.u + w.u * (sign * s)));
        if e(a) <= level {
            continue;
        }
        let (mut lo, mut hi) = (0.0, a);
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if e(mid) <= level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        a = lo;
        if a == 0.0 {
            break;
        }
    }
    a
}

fn choose_wave(
    state: &SubsolutionState,
    asm: &SpectralAssembler,
    work: &BallWork,
    k: u32,
    kappa: f64,
    opts: &ImprovementOptions,
) -> Result<Option<Choice>> {
    let grid = state.grid.space;
    let level = work.params.level(grid.n);
    let mut best: Option<Choice> = None;
    for op in &work.ops {
        let spec = WaveSpec {
            generators: op.generators(),
            rho_local: op.rho(),
            frequency: k,
            center: work.ball.center,
            center_time: work.ball.time,
            radius: work.ball.radius,
            time_ratio: kappa,
            smoothness: opts.smoothness,
            amplitude: 1.0,
        };
        let unit = LocalizedWave::new(op.clone(), spec)?;
        let mut waves = Vec::with_capacity(work.points.len());
        let mut current: Option<(usize, Option<Vec<Vec<f64>>>)> = None;
        for &(p, j, _) in &work.points {
            if current.as_ref().is_none_or(|(cj, _)| *cj != j) {
                current = Some((j, asm.slice(&[&unit], state.times()[j])));
            }
            let slice = &current.as_ref().expect("slice set").1;
            waves.push(match slice {
                Some(sl) => asm.state_at(sl, p),
                None => StateTriple::zeros(grid.n),
            });
        }
        for sign in [1.0, -1.0] {
            let a = opts.amplitude_fraction * line_search(state, &work.points, &waves, sign, level);
            if a == 0.0 {
                continue;
            }
            let predicted: f64 = work
                .points
                .iter()
                .zip(&waves)
                .map(|(&(p, j, w), wv)| {
                    let m = state.m.slices[j].vector(p);
                    w * (2.0 * a * sign * m.dot(&wv.m) + a * a * wv.m.norm_sq())
                })
                .sum();
            if best.as_ref().is_none_or(|b| predicted > b.predicted) {
                best = Some(Choice {
                    wave: unit.clone().with_amplitude(sign * a),
                    predicted,
                });
            }
        }
    }
    Ok(best.filter(|c| c.predicted > 0.0))
}

fn apply(state: &SubsolutionState, waves: &[LocalizedWave]) -> Result<(SubsolutionState, FieldFamily)> {
    let (dm, du) = spectral_perturbation(waves, state.grid.space, state.times())?;
    let mut next = state.clone();
    for j in 0..next.times().len() {
        next.m.slices[j].axpy(1.0, &dm.slices[j]);
        next.u.slices[j].axpy(1.0, &du.slices[j]);
    }
    Ok((next, dm))
}

/// Balls whose support (padded by `pad` in scaled units) contains a sample
/// with non-positive hint margin.
fn violating_balls(state: &SubsolutionState, balls: &[&Ball], pad: f64) -> Vec<usize> {
    let level = state.level();
    let grid = state.grid.space;
    let mut hit = vec![false; balls.len()];
    for j in 0..state.times().len() {
        let t = state.times()[j];
        for p in 0..grid.len() {
            let z = state_at(state, p, j);
            if level - e_unchecked(state.rho0.scalar(p), &z.m, &z.u) > 0.0 {
                continue;
            }
            let x = grid.point(p);
            let scaled = |b: &Ball| {
                let dx2: f64 = (0..grid.n).map(|i| periodic_delta(b.center[i], x[i]).powi(2)).sum();
                (dx2 / (b.radius * b.radius) + ((b.time - t) / b.time_radius).powi(2)).sqrt()
            };
            let near: Vec<usize> = (0..balls.len()).filter(|&i| scaled(balls[i]) < 1.0 + pad).collect();
            if near.is_empty() {
                // outside every padded support: blame the closest
                if let Some(i) = (0..balls.len()).min_by(|&a, &b| scaled(balls[a]).total_cmp(&scaled(balls[b]))) {
                    hit[i] = true;
                }
            }
            for i in near {
                hit[i] = true;
            }
        }
    }
    (0..balls.len()).filter(|&i| hit[i]).collect()
}

/// Add one localized wave per cover ball, searching frequencies from
/// `k_min` upward until the perturbed state stays strictly inside the
/// relaxed set at every sample.
pub fn improvement_step(
    state: &SubsolutionState,
    target: &Target,
    opts: &ImprovementOptions,
    seed: u64,
) -> Result<(SubsolutionState, GainReport)> {
    let started = Instant::now();
    opts.validate()?;
    let grid = state.grid.space;
    let kappa = match *target {
        Target::SpaceTime { .. } => opts.time_ratio,
        Target::Slice { window, .. } => opts.time_ratio.min(window / opts.cover_radius),
    };
    let cap = ImprovementOptions::frequency_cap(grid.points);
    if opts.k_min > cap {
        return Err(Error::NoAdmissibleFrequency { cap, ball: 0 });
    }
    let cover = ball_cover(
        state,
        target,
        &CoverOptions {
            radius: opts.cover_radius,
            levels: opts.cover_levels,
            time_ratio: kappa,
            max_balls: opts.max_balls,
        },
        seed,
    )?;
    let deficit_before = target_deficit(state, target);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157_a7e5);
    let work = cover
        .balls
        .iter()
        .cloned()
        .map(|b| prepare_ball(state, target, b, opts, &mut rng))
        .collect::<Result<Vec<_>>>()?;

    let asm = SpectralAssembler::new(grid);
    let mut k = opts.k_min;
    let mut last_failure = 0;
    let accepted = loop {
        let mut chosen: Vec<(usize, Choice)> = Vec::new();
        for (i, w) in work.iter().enumerate() {
            if let Some(c) = choose_wave(state, &asm, w, k, kappa, opts)? {
                chosen.push((i, c));
            }
        }
        if chosen.is_empty() {
            let dm = FieldFamily::zeros(state.times().to_vec(), grid, crate::torus::FieldKind::Vector);
            break (state.clone(), dm, 0, chosen, Vec::new(), k);
        }
        let mut waves: Vec<LocalizedWave> = chosen.iter().map(|(_, c)| c.wave.clone()).collect();
        let pad = 2.0 * grid.spacing() / opts.cover_radius;
        let mut found = None;
        for attempt in 0..=3 * opts.retries {
            let (next, dm) = apply(state, &waves)?;
            let balls: Vec<&Ball> = chosen.iter().map(|(i, _)| &work[*i].ball).collect();
            let bad = violating_balls(&next, &balls, pad);
            if bad.is_empty() {
                found = Some((next, dm, attempt));
                break;
            }
            last_failure = chosen[bad[0]].0;
            // local halvings first, then all waves together to damp the
            // accumulated spectral tails
            let targets: Vec<usize> = if attempt < opts.retries { bad } else { (0..waves.len()).collect() };
            for i in targets {
                let a = waves[i].spec().amplitude;
                waves[i] = waves[i].clone().with_amplitude(0.5 * a);
            }
        }
        if let Some((next, dm, halvings)) = found {
            break (next, dm, halvings as u32, chosen, waves, k);
        }
        if k > cap / 2 {
            return Err(Error::NoAdmissibleFrequency {
                cap,
                ball: last_failure,
            });
        }
        k *= 2;
    };
    let (next, dm, halvings, chosen, waves, k_used) = accepted;

    let deficit_after = target_deficit(&next, target);
    let times = state.times();
    let probes = standard_vector_tests(grid.n, times[0], times[times.len() - 1], opts.probe_tests, PROBE_SEED);
    let weak_drift = probes
        .iter()
        .map(|t| weak_pairing(&dm, t).map(f64::abs))
        .try_fold(0.0, |acc: f64, r| r.map(|r| acc.max(r)))?;
    let balls: Vec<BallReport> = chosen
        .iter()
        .zip(&waves)
        .map(|((i, c), wave)| {
            let w = &work[*i];
            let (cg, dg) = wave.operator().generators();
            let amp = wave.spec().amplitude.abs();
            let mom = (cg - dg).norm() * amp;
            let gap = w.params.momentum_bound() - w.center_state.m.norm_sq();
            BallReport {
                center: w.ball.center.as_slice().to_vec(),
                time: w.ball.time,
                radius: w.ball.radius,
                time_radius: w.ball.time_radius,
                gap,
                amplitude: amp,
                momentum_amplitude: mom,
                length_ratio: mom * w.params.momentum_bound().sqrt() / gap,
                predicted_gain: c.predicted * (amp / c.wave.spec().amplitude.abs()).powi(2),
            }
        })
        .collect();
    let f_impl = balls
        .iter()
        .map(|b| b.length_ratio)
        .fold(f64::INFINITY, f64::min);
    let report = GainReport {
        l2_gain: deficit_before - deficit_after,
        deficit_before,
        deficit_after,
        k_used,
        hint_margin_min: next.hint_margin(),
        weak_drift,
        predicted_gain: balls.iter().map(|b| b.predicted_gain).sum(),
        f_impl: if f_impl.is_finite() { f_impl } else { 0.0 },
        covered: cover.covered,
        required: cover.required,
        halvings,
        balls,
        wall_time: started.elapsed().as_secs_f64(),
    };
    Ok((next, report))
}

/// Apply `steps` improvement steps over the state's whole time range,
/// checking the invariant suite and deficit monotonicity after each.
pub fn iterate_with(
    state: &SubsolutionState,
    steps: usize,
    opts: &ImprovementOptions,
    seed: u64,
    mut on_step: impl FnMut(usize, &SubsolutionState, &GainReport) -> Result<()>,
) -> Result<(SubsolutionState, Vec<GainReport>)> {
    let times = state.times();
    let target = Target::SpaceTime {
        t0: times[0],
        t1: times[times.len() - 1],
    };
    let mut current = state.clone();
    let mut reports = Vec::with_capacity(steps);
    for step in 0..steps {
        let (next, report) = improvement_step(&current, &target, opts, seed.wrapping_add(step as u64))?;
        next.check_invariants()?;
        if report.deficit_after > report.deficit_before {
            return Err(Error::invariant(
                "deficit_monotone",
                report.deficit_after - report.deficit_before,
                0.0,
            ));
        }
        on_step(step + 1, &next, &report)?;
        current = next;
        reports.push(report);
    }
    Ok((current, reports))
}

pub fn iterate(
    state: &SubsolutionState,
    steps: usize,
    opts: &ImprovementOptions,
    seed: u64,
) -> Result<(SubsolutionState, Vec<GainReport>)> {
    iterate_with(state, steps, opts, seed, |_, _, _| Ok(()))
}
