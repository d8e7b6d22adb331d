//! Stationary subsolution from the density, subsolution states (time
//! families of `(m, U)` with fixed `q₀`), their invariant suite, the
//! time-reflected data and the flat-initial-trace approximation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::admissibility::PressureLaw;
use crate::error::{Error, Result};
use crate::geometry::e_unchecked;
use crate::linalg::SymMatrix;
use crate::oscillation::{improvement_step, GainReport, ImprovementOptions, Target};
use crate::tolerances::{DIVERGENCE, WEAK_MOMENTUM};
use crate::torus::spectral::{forward_component, inverse_transform, SpectralCoeffs};
use crate::torus::weak::{momentum_residual, standard_vector_tests, TestFunction};
use crate::torus::{
    spectral_divergence, spectral_divergence_matrix, spectral_gradient, trapezoid_weights, Field,
    FieldFamily, FieldKind, GridSpec, SpatialGrid,
};

/// `Ũ` with `div Ũ + ∇p(ρ₀) = 0`, and `λ̃ = max λ_max(−Ũ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StationarySubsolution {
    pub rho0: Field,
    pub pressure: Field,
    pub u_tilde: Field,
    pub lambda_tilde: f64,
    /// Sign `s` in `Û = s · symbol · p̂` selected by the residual check.
    pub sign_branch: i8,
    /// Sup-norm of `div Ũ + ∇p(ρ₀)` for the chosen and the rejected sign.
    pub residual: f64,
    pub rejected_residual: f64,
}

impl StationarySubsolution {
    /// `q̃ = p(ρ₀) + χ̃/n`.
    pub fn q_tilde(&self, chi: f64) -> Field {
        let n = self.rho0.grid().n as f64;
        self.pressure.map(|p| p + chi / n)
    }
}

fn stationary_stress(grid: SpatialGrid, p_hat: &SpectralCoeffs, sign: f64) -> Field {
    let n = grid.n;
    let nyq = (grid.points / 2) as i64;
    let mut out = Field::zeros(grid, FieldKind::SymMatrix);
    for (c, (i, j)) in SymMatrix::packed_pairs(n).enumerate() {
        let coeffs = p_hat.multiply(|k| {
            let k2: i64 = k[..n].iter().map(|x| x * x).sum();
            if k2 == 0 || k[..n].iter().any(|x| x.abs() == nyq) {
                return Complex64::new(0.0, 0.0);
            }
            let delta = if i == j { k2 } else { 0 };
            let symbol = (n as i64 * k[i] * k[j] - delta) as f64 / ((n - 1) as f64 * k2 as f64);
            Complex64::new(sign * symbol, 0.0)
        });
        out.component_mut(c)
            .copy_from_slice(inverse_transform(&coeffs).data());
    }
    out
}

/// Sup-norm of `div U + ∇q`.
pub fn stationary_residual(u: &Field, q: &Field) -> f64 {
    let mut r = spectral_divergence_matrix(u);
    r.axpy(1.0, &spectral_gradient(q));
    r.norms().sup
}

/// Grid maximum of `λ_max(−U)`.
pub fn lambda_tilde(u: &Field) -> f64 {
    (0..u.grid().len())
        .map(|p| (-u.matrix(p)).max_eigenvalue())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn build_stationary_subsolution(rho0: &Field, law: &PressureLaw) -> Result<StationarySubsolution> {
    let min = rho0.component(0).iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::NonPositiveDensity { min });
    }
    let grid = rho0.grid();
    let pressure = rho0.map(|r| law.pressure(r));
    if !pressure.is_finite() {
        return Err(Error::NonFinite("pressure of the density"));
    }
    let p_hat = forward_component(grid, pressure.component(0));
    let branches: Vec<(i8, Field, f64)> = [-1i8, 1]
        .into_iter()
        .map(|s| {
            let u = stationary_stress(grid, &p_hat, s as f64);
            let r = stationary_residual(&u, &pressure);
            (s, u, r)
        })
        .collect();
    let best = if branches[0].2 <= branches[1].2 { 0 } else { 1 };
    let (sign_branch, u_tilde, residual) = branches[best].clone();
    Ok(StationarySubsolution {
        lambda_tilde: lambda_tilde(&u_tilde),
        rho0: rho0.clone(),
        pressure,
        u_tilde,
        sign_branch,
        residual,
        rejected_residual: branches[1 - best].2,
    })
}

/// Constant `χ̃ = margin · max(nλ̃, floor)`.
pub fn choose_chi(lambda_tilde: f64, n: usize, margin: f64, floor: f64) -> Result<f64> {
    if !(margin > 1.0) {
        return Err(Error::config("chi.margin", "must be > 1"));
    }
    if !(floor > 0.0) {
        return Err(Error::config("chi.floor", "must be > 0"));
    }
    Ok(margin * (n as f64 * lambda_tilde).max(floor))
}

/// A subsolution sampled in time: `div m = 0`, `∂t m + div U + ∇q₀ = 0`
/// and `e(ρ₀, m, U) < χ/n`, with `q₀ = p(ρ₀) + χ/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsolutionState {
    pub grid: GridSpec,
    pub rho0: Field,
    pub pressure: Field,
    pub chi: f64,
    pub m: FieldFamily,
    pub u: FieldFamily,
}

impl SubsolutionState {
    /// `m ≡ 0`, `U ≡ Ũ` on `[t0, t1]`.
    pub fn initial(stat: &StationarySubsolution, chi: f64, grid: GridSpec, t0: f64, t1: f64) -> Self {
        let times = grid.time_samples(t0, t1);
        SubsolutionState {
            grid,
            rho0: stat.rho0.clone(),
            pressure: stat.pressure.clone(),
            chi,
            m: FieldFamily::zeros(times.clone(), grid.space, FieldKind::Vector),
            u: FieldFamily::constant(times, &stat.u_tilde),
        }
    }

    pub fn n(&self) -> usize {
        self.grid.space.n
    }

    pub fn times(&self) -> &[f64] {
        &self.m.times
    }

    pub fn level(&self) -> f64 {
        self.chi / self.n() as f64
    }

    pub fn q0(&self) -> Field {
        let level = self.level();
        self.pressure.map(|p| p + level)
    }

    /// Index of the time sample closest to `t`.
    pub fn time_index(&self, t: f64) -> usize {
        let times = self.times();
        (0..times.len())
            .min_by(|&a, &b| (times[a] - t).abs().total_cmp(&(times[b] - t).abs()))
            .unwrap_or(0)
    }

    /// Pointwise `ρ₀χ − |m|²` on one slice.
    pub fn gap_slice(&self, i: usize) -> Vec<f64> {
        let m = &self.m.slices[i];
        (0..self.grid.space.len())
            .map(|p| self.rho0.scalar(p) * self.chi - m.vector(p).norm_sq())
            .collect()
    }

    /// `∫ (ρ₀χ − |m|²) dx` on slice `i`, optionally restricted by a mask.
    pub fn slice_deficit(&self, i: usize, mask: Option<&dyn Fn(usize) -> bool>) -> f64 {
        let len = self.grid.space.len() as f64;
        self.gap_slice(i)
            .into_iter()
            .enumerate()
            .filter(|(p, _)| mask.is_none_or(|f| f(*p)))
            .map(|(_, g)| g)
            .sum::<f64>()
            / len
    }

    /// `∫∫ (ρ₀χ − |m|²)` over the whole time range (trapezoid).
    pub fn deficit(&self) -> f64 {
        trapezoid_weights(self.times())
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.slice_deficit(i, None))
            .sum()
    }

    /// `∫∫ |m|²`.
    pub fn kinetic(&self) -> f64 {
        let len = self.grid.space.len() as f64;
        trapezoid_weights(self.times())
            .iter()
            .zip(&self.m.slices)
            .map(|(w, m)| w * m.data().iter().map(|v| v * v).sum::<f64>() / len)
            .sum()
    }

    /// Smallest `χ/n − e(ρ₀, m, U)` over all samples.
    pub fn hint_margin(&self) -> f64 {
        let level = self.level();
        self.m
            .slices
            .iter()
            .zip(&self.u.slices)
            .map(|(m, u)| {
                (0..self.grid.space.len())
                    .map(|p| level - e_unchecked(self.rho0.scalar(p), &m.vector(p), &u.matrix(p)))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn divergence_max(&self) -> f64 {
        self.m
            .slices
            .iter()
            .map(|m| spectral_divergence(m).norms().sup)
            .fold(0.0, f64::max)
    }

    pub fn default_tests(&self) -> Vec<TestFunction> {
        let t = self.times();
        standard_vector_tests(self.n(), t[0], t[t.len() - 1], 16, 0x5eed)
    }

    pub fn weak_residual_max(&self, tests: &[TestFunction]) -> Result<f64> {
        let q = FieldFamily::constant(self.times().to_vec(), &self.q0());
        tests
            .iter()
            .map(|t| momentum_residual(&self.m, &self.u, Some(&q), t).map(f64::abs))
            .try_fold(0.0, |acc: f64, r| r.map(|r| acc.max(r)))
    }

    /// Run the invariant suite with the default test basis.
    pub fn invariants(&self) -> Result<InvariantReport> {
        let tests = self.default_tests();
        let divergence = self.divergence_max();
        let weak_momentum = self.weak_residual_max(&tests)?;
        let hint_margin = self.hint_margin();
        let deficit = self.deficit();
        let finite = self.m.slices.iter().chain(&self.u.slices).all(Field::is_finite);
        let checks = vec![
            Check::upper("divergence", divergence, DIVERGENCE),
            Check::upper("weak_momentum", weak_momentum, WEAK_MOMENTUM),
            Check::lower("hint_margin", hint_margin, 0.0),
            Check::lower("deficit", deficit, 0.0),
            Check::lower("finite", if finite { 1.0 } else { 0.0 }, 0.5),
        ];
        Ok(InvariantReport { checks })
    }

    pub fn check_invariants(&self) -> Result<InvariantReport> {
        let report = self.invariants()?;
        if let Some(c) = report.checks.iter().find(|c| !c.pass) {
            return Err(Error::invariant(c.name.clone(), c.value, c.tolerance));
        }
        Ok(report)
    }
}

/// One numeric invariant with its tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// `true` when `value <= tolerance` (upper bound) or `value > tolerance`
    /// (lower bound).
    pub upper: bool,
    pub pass: bool,
}

impl Check {
    pub fn upper(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            upper: true,
            pass: value <= tolerance,
        }
    }

    pub fn lower(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            upper: false,
            pass: value > tolerance || (tolerance == 0.0 && value == 0.0 && name == "deficit"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub checks: Vec<Check>,
}

impl InvariantReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Reflect a flat subsolution on `[−T, T]` into data on `[0, 2T]`:
/// `τ ∈ [0, T]` reads `t = τ`, `τ ∈ [T, 2T]` reads `t = τ − 2T`.
pub fn time_symmetric_data(flat: &SubsolutionState) -> Result<SubsolutionState> {
    let nt = flat.times().len();
    if nt % 2 == 0 {
        return Err(Error::Precondition("flat family needs an odd number of samples".into()));
    }
    let half = (nt - 1) / 2;
    let t0 = flat.times()[0];
    let t1 = flat.times()[nt - 1];
    if (t0 + t1).abs() > 1e-12 * t1.abs().max(1.0) {
        return Err(Error::Precondition("flat family must be centred at t = 0".into()));
    }
    let seam = flat.m.slices[0]
        .data()
        .iter()
        .zip(flat.m.slices[nt - 1].data())
        .chain(flat.u.slices[0].data().iter().zip(flat.u.slices[nt - 1].data()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if seam > 1e-10 {
        return Err(Error::SeamMismatch(seam));
    }
    let source = |j: usize| if j <= half { j + half } else { j - half };
    let times: Vec<f64> = (0..nt)
        .map(|j| flat.times()[source(j)] + if j <= half { 0.0 } else { 2.0 * t1 })
        .collect();
    let pick = |fam: &FieldFamily| FieldFamily {
        times: times.clone(),
        slices: (0..nt).map(|j| fam.slices[source(j)].clone()).collect(),
    };
    Ok(SubsolutionState {
        grid: flat.grid,
        rho0: flat.rho0.clone(),
        pressure: flat.pressure.clone(),
        chi: flat.chi,
        m: pick(&flat.m),
        u: pick(&flat.u),
    })
}

/// Progress of the flat-trace construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatReport {
    /// `∫_Q (ρ₀χ − |m(·,0)|²)` before each iteration and after the last.
    pub deficits: Vec<f64>,
    /// The same restricted to the sub-cube `Q_k` of each iteration.
    pub local_deficits: Vec<f64>,
    pub steps: Vec<GainReport>,
    pub beta_impl: Option<f64>,
}

/// Side of the centred sub-cube `Q_k` with `|Q \ Q_k| = 2^{−k}`.
pub fn subcube_side(n: usize, k: u32) -> f64 {
    (1.0 - 0.5f64.powi(k as i32)).powf(1.0 / n as f64)
}

pub fn in_subcube(x: &crate::linalg::Vector, side: f64) -> bool {
    x.as_slice().iter().all(|&v| (v - 0.5).abs() <= 0.5 * side)
}

/// Largest `β` with `α_{k+1} ≤ α_k − β α_k²` along a positive sequence.
pub fn fit_beta(seq: &[f64]) -> Option<f64> {
    seq.windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| (w[0] - w[1]) / (w[0] * w[0]))
        .reduce(f64::min)
}

/// Starting from `m ≡ 0, U ≡ Ũ` on `[−T, T]`, apply `iters` improvement
/// steps localized to `Q_k × [−2^{−k}T, 2^{−k}T]`, aiming at the `t = 0`
/// slice.
pub fn approximate_flat_subsolution(
    stat: &StationarySubsolution,
    chi: f64,
    grid: GridSpec,
    iters: u32,
    opts: &ImprovementOptions,
    seed: u64,
) -> Result<(SubsolutionState, FlatReport)> {
    let horizon = grid.horizon;
    let mut state = SubsolutionState::initial(stat, chi, grid, -horizon, horizon);
    let zero = state.time_index(0.0);
    let mut deficits = vec![state.slice_deficit(zero, None)];
    let mut local_deficits = Vec::new();
    let mut steps = Vec::new();
    for k in 1..=iters {
        let side = subcube_side(grid.space.n, k);
        let g = grid.space;
        local_deficits.push(state.slice_deficit(zero, Some(&|p| in_subcube(&g.point(p), side))));
        let target = Target::Slice {
            window: horizon * 0.5f64.powi(k as i32),
            subcube: side,
        };
        let (next, report) = improvement_step(&state, &target, opts, seed.wrapping_add(k as u64))?;
        next.check_invariants()?;
        state = next;
        deficits.push(state.slice_deficit(zero, None));
        steps.push(report);
    }
    let beta_impl = fit_beta(&deficits);
    Ok((
        state,
        FlatReport {
            deficits,
            local_deficits,
            steps,
            beta_impl,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use std::f64::consts::PI;

    fn law() -> PressureLaw {
        PressureLaw::polytropic(1.0, 2.0).unwrap()
    }

    #[test]
    fn constant_density_gives_zero_stress() {
        let g = SpatialGrid::new(2, 16).unwrap();
        let s = build_stationary_subsolution(&Field::scalar_from_fn(g, |_| 1.3), &law()).unwrap();
        assert!(s.u_tilde.norms().sup < 1e-14);
        assert!(s.lambda_tilde.abs() < 1e-14);
    }

    #[test]
    fn cosine_pressure_gives_diagonal_stress() {
        // p(ρ) = ρ² with ρ² = 2 + cos(2πx₁)
        let g = SpatialGrid::new(2, 32).unwrap();
        let rho = Field::scalar_from_fn(g, |x| (2.0 + (2.0 * PI * x[0]).cos()).sqrt());
        let s = build_stationary_subsolution(&rho, &law()).unwrap();
        assert_eq!(s.sign_branch, -1);
        assert!(s.residual < 1e-10);
        assert!(s.rejected_residual > 1.0);
        for p in 0..g.len() {
            let u = s.u_tilde.matrix(p);
            let x = g.point(p);
            assert!(u.get(0, 1).abs() < 1e-12);
            assert!((u.get(1, 1) + u.get(0, 0)).abs() < 1e-12);
            // Ũ₁₁ = −cos(2πx₁) solves ∂₁Ũ₁₁ = −∂₁p
            assert!((u.get(0, 0) + (2.0 * PI * x[0]).cos()).abs() < 1e-12);
        }
        assert!((s.lambda_tilde - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_density_residual_and_symbol_identity() {
        let g = SpatialGrid::new(2, 64).unwrap();
        let rho = Field::scalar_from_fn(g, |x| {
            2.0 + 0.4 * (2.0 * PI * (x[0] + 2.0 * x[1])).sin() + 0.3 * (2.0 * PI * 3.0 * x[1]).cos()
        });
        let s = build_stationary_subsolution(&rho, &law()).unwrap();
        assert!(s.residual <= 1e-8);
        for p in 0..g.len() {
            assert!(s.u_tilde.matrix(p).trace().abs() <= 1e-12);
        }
        // Σ_j k_j Û_ij = −k_i p̂ in coefficient space
        let p_hat = forward_component(g, s.pressure.component(0));
        let comps: Vec<SpectralCoeffs> = (0..3).map(|c| forward_component(g, s.u_tilde.component(c))).collect();
        let (u11, u12, u22) = (&comps[0], &comps[1], &comps[2]);
        for idx in 0..g.len() {
            let k = p_hat.wavevector(idx);
            if k[0].abs() == 32 || k[1].abs() == 32 {
                continue;
            }
            let (k1, k2) = (k[0] as f64, k[1] as f64);
            let r1 = u11.as_slice()[idx] * k1 + u12.as_slice()[idx] * k2 + p_hat.as_slice()[idx] * k1;
            let r2 = u12.as_slice()[idx] * k1 + u22.as_slice()[idx] * k2 + p_hat.as_slice()[idx] * k2;
            assert!(r1.norm() < 1e-12 && r2.norm() < 1e-12);
        }
        let chi = choose_chi(s.lambda_tilde, 2, 1.5, 1.0).unwrap();
        for p in 0..g.len() {
            let e = e_unchecked(rho.scalar(p), &Vector::zeros(2), &s.u_tilde.matrix(p));
            assert!(e < chi / 2.0);
        }
    }

    #[test]
    fn choose_chi_examples() {
        assert_eq!(choose_chi(1.0, 2, 1.5, 1.0).unwrap(), 3.0);
        assert_eq!(choose_chi(0.0, 2, 1.5, 1.0).unwrap(), 1.5);
        assert!(choose_chi(1.0, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn nonpositive_density_rejected() {
        let g = SpatialGrid::new(2, 16).unwrap();
        let rho = Field::scalar_from_fn(g, |x| (2.0 * PI * x[0]).sin());
        assert!(matches!(
            build_stationary_subsolution(&rho, &law()),
            Err(Error::NonPositiveDensity { .. })
        ));
    }

    fn sample_state(nt_half: usize) -> SubsolutionState {
        let g = SpatialGrid::new(2, 16).unwrap();
        let rho = Field::scalar_from_fn(g, |x| 2.0 + 0.3 * (2.0 * PI * x[1]).cos());
        let s = build_stationary_subsolution(&rho, &law()).unwrap();
        let chi = choose_chi(s.lambda_tilde, 2, 1.5, 1.0).unwrap();
        let grid = GridSpec::new(2, 16, 0.5 / nt_half as f64, 0.5).unwrap();
        SubsolutionState::initial(&s, chi, grid, -0.5, 0.5)
    }

    #[test]
    fn initial_state_passes_invariants() {
        let st = sample_state(20);
        let rep = st.check_invariants().unwrap();
        assert!(rep.all_pass());
        let expect: f64 = 1.0 * st.rho0.mean() * st.chi;
        assert!((st.deficit() - expect).abs() < 1e-12);
    }

    #[test]
    fn time_symmetric_zero_and_seam() {
        let st = sample_state(10);
        let sym = time_symmetric_data(&st).unwrap();
        assert_eq!(sym.times().len(), st.times().len());
        assert!((sym.times()[0]).abs() < 1e-15);
        assert!((sym.times()[20] - 1.0).abs() < 1e-12);
        assert!(sym.m.slices.iter().all(|m| m.norms().sup == 0.0));
        assert_eq!(sym.u.slices[10], st.u.slices[0]);

        // mark each slice by its time and check the index arithmetic
        let mut marked = st.clone();
        for (i, m) in marked.m.slices.iter_mut().enumerate() {
            let t = st.times()[i];
            let mark = if i == 0 || i == 20 { 0.0 } else { t };
            m.data_mut().iter_mut().for_each(|v| *v = mark);
        }
        let sym = time_symmetric_data(&marked).unwrap();
        for j in 0..21 {
            let tau = sym.times()[j];
            let expect_t = if tau <= 0.5 + 1e-12 { tau } else { tau - 1.0 };
            let expect = if (expect_t.abs() - 0.5).abs() < 1e-12 { 0.0 } else { expect_t };
            assert!((sym.m.slices[j].data()[0] - expect).abs() < 1e-12, "j={j}");
        }

        let mut broken = st.clone();
        broken.m.slices[0].data_mut()[0] = 1e-6;
        assert!(matches!(time_symmetric_data(&broken), Err(Error::SeamMismatch(_))));
    }

    #[test]
    fn subcubes_shrink_complement() {
        for k in 1..6 {
            let side = subcube_side(2, k);
            assert!((1.0 - side * side - 0.5f64.powi(k as i32)).abs() < 1e-14);
        }
    }

    #[test]
    fn beta_fit() {
        assert_eq!(fit_beta(&[1.0, 0.5]), Some(0.5));
        assert!(fit_beta(&[1.0]).is_none());
    }

    #[test]
    fn flat_subsolution_improves_the_zero_slice() {
        let g = SpatialGrid::new(2, 32).unwrap();
        let rho = Field::scalar_from_fn(g, |x| 2.0 + 0.5 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let stat = build_stationary_subsolution(&rho, &law()).unwrap();
        let chi = choose_chi(stat.lambda_tilde, 2, 1.5, 1.0).unwrap();
        let grid = GridSpec::new(2, 32, 1.0 / 256.0, 0.25).unwrap();
        let opts = ImprovementOptions {
            k_min: 32,
            cover_radius: 0.15,
            ..Default::default()
        };
        let (flat, report) = approximate_flat_subsolution(&stat, chi, grid, 2, &opts, 8).unwrap();
        assert_eq!(report.deficits.len(), 3);
        assert_eq!(report.local_deficits.len(), 2);
        assert!(report.deficits.windows(2).all(|w| w[1] < w[0]), "{:?}", report.deficits);
        assert!(report.beta_impl.is_some_and(|b| b > 0.0));
        flat.check_invariants().unwrap();
        // slices far from t = 0 are untouched
        let (first, last) = (0, flat.times().len() - 1);
        assert!(flat.m.slices[first].norms().sup == 0.0 && flat.m.slices[last].norms().sup == 0.0);
        let sym = time_symmetric_data(&flat).unwrap();
        assert_eq!(sym.times()[0], 0.0);
        assert!((sym.times().last().unwrap() - 0.5).abs() < 1e-12);
    }
}
