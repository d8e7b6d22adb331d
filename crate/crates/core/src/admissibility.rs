//! Energy admissibility: internal energy from the pressure law, the
//! gradient constants, the `χ` profile solving
//! `χ' = −C₁√χ − C₂χ^{3/2}`, the maximal time `T̄` and the weak energy
//! residual against nonnegative tests.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::torus::weak::TimeBump;
use crate::torus::{spectral_gradient, trapezoid_weights, Field, FieldFamily, FieldKind, SpatialGrid};

/// Barotropic pressure law `p(ρ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PressureLaw {
    /// `p(ρ) = kρ^γ`.
    Polytropic { k: f64, gamma: f64 },
    /// Monotone cubic Hermite interpolation through `(rho[i], p[i])`,
    /// extended linearly beyond the table.
    Tabulated { rho: Vec<f64>, p: Vec<f64> },
}

impl PressureLaw {
    pub fn polytropic(k: f64, gamma: f64) -> Result<Self> {
        let law = PressureLaw::Polytropic { k, gamma };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PressureLaw::Polytropic { k, gamma } => {
                if !(*k > 0.0) {
                    return Err(Error::config("pressure.k", "must be > 0"));
                }
                if !(*gamma > 1.0) {
                    return Err(Error::config("pressure.gamma", "must be > 1"));
                }
            }
            PressureLaw::Tabulated { rho, p } => {
                if rho.len() != p.len() || rho.len() < 2 {
                    return Err(Error::config("pressure", "need >= 2 (rho, p) pairs of equal length"));
                }
                if rho[0] < 0.0 || rho.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::config("pressure.rho", "must be nonnegative and strictly increasing"));
                }
                if p.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::config("pressure.p", "must be strictly increasing"));
                }
            }
        }
        Ok(())
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        match self {
            PressureLaw::Polytropic { k, gamma } => k * rho.powf(*gamma),
            PressureLaw::Tabulated { rho: xs, p } => hermite(xs, p, rho).0,
        }
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        match self {
            PressureLaw::Polytropic { k, gamma } => k * gamma * rho.powf(gamma - 1.0),
            PressureLaw::Tabulated { rho: xs, p } => hermite(xs, p, rho).1,
        }
    }

    /// `ε(ρ) − ε(ρ_ref)` with `p = ρ²ε'`, closed form when available.
    pub fn internal_energy(&self, rho: f64, rho_ref: f64) -> Result<f64> {
        if !(rho > 0.0) || !(rho_ref > 0.0) {
            return Err(Error::NonPositiveDensity { min: rho.min(rho_ref) });
        }
        match self {
            PressureLaw::Polytropic { k, gamma } => {
                let g1 = gamma - 1.0;
                Ok(k * (rho.powf(g1) - rho_ref.powf(g1)) / g1)
            }
            PressureLaw::Tabulated { .. } => self.internal_energy_quadrature(rho, rho_ref),
        }
    }

    /// `∫_{ρ_ref}^{ρ} p(s)/s² ds` by adaptive Simpson quadrature.
    pub fn internal_energy_quadrature(&self, rho: f64, rho_ref: f64) -> Result<f64> {
        if !(rho > 0.0) || !(rho_ref > 0.0) {
            return Err(Error::NonPositiveDensity { min: rho.min(rho_ref) });
        }
        Ok(adaptive_simpson(&|s| self.pressure(s) / (s * s), rho_ref, rho, 1e-13))
    }
}

/// Value and slope of the monotone (Fritsch–Carlson) cubic interpolant.
fn hermite(xs: &[f64], ys: &[f64], x: f64) -> (f64, f64) {
    let n = xs.len();
    let secant: Vec<f64> = (0..n - 1)
        .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
        .collect();
    let slope = |i: usize| -> f64 {
        if i == 0 {
            secant[0]
        } else if i == n - 1 {
            secant[n - 2]
        } else if secant[i - 1] * secant[i] <= 0.0 {
            0.0
        } else {
            let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            (w1 + w2) / (w1 / secant[i - 1] + w2 / secant[i])
        }
    };
    if x <= xs[0] {
        return (ys[0] + slope(0) * (x - xs[0]), slope(0));
    }
    if x >= xs[n - 1] {
        return (ys[n - 1] + slope(n - 1) * (x - xs[n - 1]), slope(n - 1));
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let h = xs[i + 1] - xs[i];
    let t = (x - xs[i]) / h;
    let (m0, m1) = (slope(i) * h, slope(i + 1) * h);
    let (t2, t3) = (t * t, t * t * t);
    let value = (2.0 * t3 - 3.0 * t2 + 1.0) * ys[i]
        + (t3 - 2.0 * t2 + t) * m0
        + (-2.0 * t3 + 3.0 * t2) * ys[i + 1]
        + (t3 - t2) * m1;
    let dvalue = ((6.0 * t2 - 6.0 * t) * ys[i]
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (-6.0 * t2 + 6.0 * t) * ys[i + 1]
        + (3.0 * t2 - 2.0 * t) * m1)
        / h;
    (value, dvalue)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Gradient bounds of the density data entering the energy inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(rename = "C1")]
    pub big_c1: f64,
    #[serde(rename = "C2")]
    pub big_c2: f64,
}

impl AdmissibilityConstants {
    pub fn from_bounds(c0: f64, c1: f64, c2: f64) -> Self {
        AdmissibilityConstants {
            c0,
            c1,
            c2,
            big_c1: 2.0 * c1 * c0,
            big_c2: c2 * c0,
        }
    }

    /// Scale `c₁, c₂` (and hence `C₁, C₂`) by `slack ≥ 1`.
    pub fn with_slack(&self, slack: f64) -> Self {
        Self::from_bounds(self.c0, self.c1 * slack, self.c2 * slack)
    }
}

/// Energy-flux potential `ε(ρ₀) + p(ρ₀)/ρ₀` on the grid, with `ε`
/// referenced to the density mean.
pub fn enthalpy_field(rho0: &Field, law: &PressureLaw) -> Result<Field> {
    let rho_ref = rho0.mean();
    let values = rho0
        .component(0)
        .iter()
        .map(|&r| Ok(law.internal_energy(r, rho_ref)? + law.pressure(r) / r))
        .collect::<Result<Vec<_>>>()?;
    Field::from_data(rho0.grid(), FieldKind::Scalar, values)
}

fn check_density(rho0: &Field) -> Result<()> {
    let min = rho0.component(0).iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::NonPositiveDensity { min });
    }
    if !rho0.is_finite() {
        return Err(Error::NonFinite("density"));
    }
    Ok(())
}

pub fn compute_constants(rho0: &Field, law: &PressureLaw) -> Result<AdmissibilityConstants> {
    check_density(rho0)?;
    let max = rho0.component(0).iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c1 = spectral_gradient(&enthalpy_field(rho0, law)?).norms().sup;
    let c2 = spectral_gradient(&rho0.map(|r| 1.0 / r)).norms().sup;
    Ok(AdmissibilityConstants::from_bounds(max.sqrt(), c1, c2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiBranch {
    Constant,
    Linear,
    Reciprocal,
    Tangent,
    Rk4,
}

/// `χ(t)` solving `χ' = −C₁√χ − C₂χ^{3/2}`, `χ(0) = χ₀`, on `[0, t_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiProfile {
    pub chi0: f64,
    #[serde(rename = "C1")]
    pub big_c1: f64,
    #[serde(rename = "C2")]
    pub big_c2: f64,
    pub t_max: f64,
    pub branch: ChiBranch,
    /// `(t, u)` samples of `u = √χ` for the RK4 representation.
    #[serde(skip)]
    samples: Vec<(f64, f64)>,
}

fn branch_for(c1: f64, c2: f64) -> ChiBranch {
    match (c1 > 0.0, c2 > 0.0) {
        (false, false) => ChiBranch::Constant,
        (true, false) => ChiBranch::Linear,
        (false, true) => ChiBranch::Reciprocal,
        (true, true) => ChiBranch::Tangent,
    }
}

/// Closed-form profile.
pub fn chi_solve(chi0: f64, constants: &AdmissibilityConstants, t_max: f64) -> Result<ChiProfile> {
    if !(chi0 > 0.0) {
        return Err(Error::Precondition(format!("chi0 = {chi0} must be > 0")));
    }
    Ok(ChiProfile {
        chi0,
        big_c1: constants.big_c1,
        big_c2: constants.big_c2,
        t_max,
        branch: branch_for(constants.big_c1, constants.big_c2),
        samples: Vec::new(),
    })
}

/// Profile integrated with classical RK4 at step `h` (cubic Hermite
/// interpolation between steps).
pub fn chi_solve_rk4(
    chi0: f64,
    constants: &AdmissibilityConstants,
    t_max: f64,
    h: f64,
) -> Result<ChiProfile> {
    if !(chi0 > 0.0) {
        return Err(Error::Precondition(format!("chi0 = {chi0} must be > 0")));
    }
    let (c1, c2) = (constants.big_c1, constants.big_c2);
    let f = |u: f64| -0.5 * (c1 + c2 * u * u);
    let steps = (t_max / h).ceil().max(1.0) as usize;
    let h = t_max / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut u = chi0.sqrt();
    samples.push((0.0, u));
    for i in 0..steps {
        if u > 0.0 {
            let k1 = f(u);
            let k2 = f(u + 0.5 * h * k1);
            let k3 = f(u + 0.5 * h * k2);
            let k4 = f(u + h * k3);
            u = (u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).max(0.0);
        }
        samples.push(((i + 1) as f64 * h, u));
    }
    Ok(ChiProfile {
        chi0,
        big_c1: c1,
        big_c2: c2,
        t_max,
        branch: ChiBranch::Rk4,
        samples,
    })
}

impl ChiProfile {
    fn u_rate(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            -0.5 * (self.big_c1 + self.big_c2 * u * u)
        }
    }

    /// `√χ(t)`, clipped at 0.
    pub fn sqrt_chi(&self, t: f64) -> f64 {
        let u0 = self.chi0.sqrt();
        let (c1, c2) = (self.big_c1, self.big_c2);
        let u = match self.branch {
            ChiBranch::Constant => u0,
            ChiBranch::Linear => u0 - 0.5 * c1 * t,
            ChiBranch::Reciprocal => u0 / (1.0 + 0.5 * c2 * u0 * t),
            ChiBranch::Tangent => {
                let r = (c1 / c2).sqrt();
                let phase = (u0 / r).atan() - 0.5 * (c1 * c2).sqrt() * t;
                if phase <= 0.0 {
                    0.0
                } else {
                    r * phase.tan()
                }
            }
            ChiBranch::Rk4 => return self.rk4_interp(t),
        };
        u.max(0.0)
    }

    fn rk4_interp(&self, t: f64) -> f64 {
        let s = &self.samples;
        let t = t.clamp(0.0, s[s.len() - 1].0);
        let i = s.partition_point(|p| p.0 <= t).saturating_sub(1).min(s.len() - 2);
        let ((ta, ua), (tb, ub)) = (s[i], s[i + 1]);
        let h = tb - ta;
        let x = (t - ta) / h;
        let (ma, mb) = (self.u_rate(ua) * h, self.u_rate(ub) * h);
        let (x2, x3) = (x * x, x * x * x);
        ((2.0 * x3 - 3.0 * x2 + 1.0) * ua + (x3 - 2.0 * x2 + x) * ma + (-2.0 * x3 + 3.0 * x2) * ub + (x3 - x2) * mb)
            .max(0.0)
    }

    pub fn chi(&self, t: f64) -> f64 {
        if self.branch == ChiBranch::Constant {
            return self.chi0;
        }
        self.sqrt_chi(t).powi(2)
    }

    /// `χ'(t) = 2u u'`.
    pub fn derivative(&self, t: f64) -> f64 {
        let u = self.sqrt_chi(t);
        2.0 * u * self.u_rate(u)
    }

    /// Time at which `χ` reaches 0 (infinite if never).
    pub fn extinction_time(&self) -> f64 {
        let u0 = self.chi0.sqrt();
        let (c1, c2) = (self.big_c1, self.big_c2);
        match branch_for(c1, c2) {
            ChiBranch::Linear => 2.0 * u0 / c1,
            ChiBranch::Tangent => 2.0 * (u0 * (c2 / c1).sqrt()).atan() / (c1 * c2).sqrt(),
            _ => f64::INFINITY,
        }
    }
}

/// First time `χ(t)` equals `threshold`, by closed-form inversion
/// (bisection for RK4 profiles). An infinite time is reported as `t_max`.
pub fn maximal_time(profile: &ChiProfile, threshold: f64) -> Result<f64> {
    if !(profile.chi0 > threshold) {
        return Err(Error::Precondition(format!(
            "chi0 = {} must exceed the threshold {threshold}",
            profile.chi0
        )));
    }
    let u0 = profile.chi0.sqrt();
    let uth = threshold.max(0.0).sqrt();
    let (c1, c2) = (profile.big_c1, profile.big_c2);
    let t = match profile.branch {
        ChiBranch::Constant => f64::INFINITY,
        ChiBranch::Linear => 2.0 * (u0 - uth) / c1,
        ChiBranch::Reciprocal => {
            if uth == 0.0 {
                f64::INFINITY
            } else {
                2.0 * (1.0 / uth - 1.0 / u0) / c2
            }
        }
        ChiBranch::Tangent => {
            let s = (c2 / c1).sqrt();
            2.0 * ((u0 * s).atan() - (uth * s).atan()) / (c1 * c2).sqrt()
        }
        ChiBranch::Rk4 => return maximal_time_bisection(profile, threshold),
    };
    Ok(if t.is_finite() { t } else { profile.t_max })
}

/// `T̄` by bisection on `χ(t) − threshold` within `[0, t_max]`.
pub fn maximal_time_bisection(profile: &ChiProfile, threshold: f64) -> Result<f64> {
    if !(profile.chi0 > threshold) {
        return Err(Error::Precondition(format!(
            "chi0 = {} must exceed the threshold {threshold}",
            profile.chi0
        )));
    }
    let mut hi = profile.t_max;
    if profile.chi(hi) > threshold {
        return Ok(profile.t_max);
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if profile.chi(mid) > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `φ(x, t) = P(x)² θ(t)²` with `P = a₀ + Σ a_j cos(2πk_j·x + φ_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonnegTest {
    pub offset: f64,
    pub modes: Vec<([i64; 3], f64, f64)>,
    pub bump: TimeBump,
}

impl NonnegTest {
    /// `(P, ∇P)` at `x`.
    fn spatial(&self, x: &Vector) -> (f64, Vector) {
        let n = x.dim();
        let mut p = self.offset;
        let mut grad = Vector::zeros(n);
        for (k, amp, phase) in &self.modes {
            let arg = 2.0 * PI * (0..n).map(|a| k[a] as f64 * x[a]).sum::<f64>() + phase;
            p += amp * arg.cos();
            for a in 0..n {
                grad[a] -= amp * 2.0 * PI * k[a] as f64 * arg.sin();
            }
        }
        (p, grad)
    }

    fn time(&self, t: f64) -> (f64, f64) {
        let th = self.bump.value(t);
        (th * th, 2.0 * th * self.bump.derivative(t))
    }
}

/// Seeded nonnegative test set on `[t0, t1]`.
pub fn nonneg_tests(n: usize, t0: f64, t1: f64, count: usize, seed: u64) -> Vec<NonnegTest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = t1 - t0;
    (0..count)
        .map(|_| {
            let modes = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let mut k = [0i64; 3];
                    for slot in k.iter_mut().take(n) {
                        *slot = rng.gen_range(-2..=2);
                    }
                    (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))
                })
                .collect();
            let half_width = len * rng.gen_range(0.25..0.5);
            NonnegTest {
                offset: rng.gen_range(-0.5..0.5),
                modes,
                bump: TimeBump {
                    center: rng.gen_range(t0 + half_width..=t1 - half_width),
                    half_width,
                },
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Pairings of the reduced integrand, one per test.
    pub reduced: Vec<f64>,
    /// `−∫∫ E ∂tφ + F·∇φ`, one per test.
    pub full: Vec<f64>,
    pub worst: f64,
    pub worst_full: f64,
}

/// Weak energy residuals of a momentum family `m` with density `ρ₀` and
/// profile `χ`: the reduced integrand
/// `½χ' + m·∇(ε + p/ρ₀) + (χ/2) m·∇(1/ρ₀)` and the full flux form.
pub fn energy_residual(
    rho0: &Field,
    m: &FieldFamily,
    profile: &ChiProfile,
    law: &PressureLaw,
    tests: &[NonnegTest],
) -> Result<EnergyReport> {
    check_density(rho0)?;
    let grid = rho0.grid();
    if m.grid() != grid {
        return Err(Error::GridMismatch("momentum vs density".into()));
    }
    let enthalpy = enthalpy_field(rho0, law)?;
    let g1 = spectral_gradient(&enthalpy);
    let g2 = spectral_gradient(&rho0.map(|r| 1.0 / r));
    let rho_ref = rho0.mean();
    let w = trapezoid_weights(&m.times);
    let len = grid.len();

    // Per-slice spatial fields: reduced integrand without ½χ', energy
    // density E and flux F.
    struct Slice {
        reduced: Vec<f64>,
        energy: Vec<f64>,
        flux: Vec<Vector>,
        chi_rate: f64,
    }
    let slices: Vec<Slice> = m
        .times
        .iter()
        .zip(&m.slices)
        .map(|(&t, mf)| {
            let chi = profile.chi(t);
            let mut reduced = Vec::with_capacity(len);
            let mut energy = Vec::with_capacity(len);
            let mut flux = Vec::with_capacity(len);
            for p in 0..len {
                let mv = mf.vector(p);
                let r = rho0.scalar(p);
                reduced.push(mv.dot(&g1.vector(p)) + 0.5 * chi * mv.dot(&g2.vector(p)));
                let kinetic = 0.5 * mv.norm_sq() / r;
                let eps = law.internal_energy(r, rho_ref).unwrap_or(0.0);
                energy.push(kinetic + r * eps);
                flux.push(mv * ((kinetic + r * eps + law.pressure(r)) / r));
            }
            Slice {
                reduced,
                energy,
                flux,
                chi_rate: profile.derivative(t),
            }
        })
        .collect();

    let points: Vec<Vector> = (0..len).map(|p| grid.point(p)).collect();
    let results: Vec<(f64, f64)> = tests
        .par_iter()
        .map(|test| {
            let spatial: Vec<(f64, Vector)> = points.iter().map(|x| test.spatial(x)).collect();
            let (mut reduced, mut full) = (0.0, 0.0);
            for (i, s) in slices.iter().enumerate() {
                let (th2, dth2) = test.time(m.times[i]);
                if th2 == 0.0 && dth2 == 0.0 {
                    continue;
                }
                let (mut r_acc, mut e_acc, mut f_acc, mut p2_mean) = (0.0, 0.0, 0.0, 0.0);
                for (p, (pv, gp)) in spatial.iter().enumerate() {
                    let p2 = pv * pv;
                    p2_mean += p2;
                    r_acc += s.reduced[p] * p2;
                    e_acc += s.energy[p] * p2;
                    f_acc += s.flux[p].dot(gp) * 2.0 * pv;
                }
                let lenf = len as f64;
                reduced += w[i] * th2 * (0.5 * s.chi_rate * p2_mean + r_acc) / lenf;
                full -= w[i] * (dth2 * e_acc + th2 * f_acc) / lenf;
            }
            (reduced, full)
        })
        .collect();
    let (reduced, full): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    let worst = reduced.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst_full = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyReport {
        reduced,
        full,
        worst,
        worst_full,
    })
}

/// The momentum family `√(ρ₀χ(t)) m̂` built from the directions of `m`
/// (falling back to `e₁` where `m` vanishes).
pub fn saturated_family(rho0: &Field, m: &Field, profile: &ChiProfile, times: &[f64]) -> FieldFamily {
    let grid = rho0.grid();
    let n = grid.n;
    let dirs: Vec<Vector> = (0..grid.len())
        .map(|p| {
            let v = m.vector(p);
            let r = v.norm();
            if r > 1e-300 {
                v * (1.0 / r)
            } else {
                Vector::unit(n, 0)
            }
        })
        .collect();
    let slices = times
        .iter()
        .map(|&t| {
            let chi = profile.chi(t);
            let mut f = Field::zeros(grid, FieldKind::Vector);
            for (p, d) in dirs.iter().enumerate() {
                f.set_vector(p, &(*d * (rho0.scalar(p) * chi).sqrt()));
            }
            f
        })
        .collect();
    FieldFamily {
        times: times.to_vec(),
        slices,
    }
}

/// Largest violation of the pointwise bounds `|m·∇(ε+p/ρ₀)| ≤ c₁c₀√χ` and
/// `|m·∇(1/ρ₀)| χ/2 ≤ c₂c₀χ^{3/2}/2` over a family (≤ 0 when they hold).
pub fn pointwise_bound_excess(
    rho0: &Field,
    m: &FieldFamily,
    profile: &ChiProfile,
    law: &PressureLaw,
    constants: &AdmissibilityConstants,
) -> Result<f64> {
    let g1 = spectral_gradient(&enthalpy_field(rho0, law)?);
    let g2 = spectral_gradient(&rho0.map(|r| 1.0 / r));
    let c = constants;
    let mut worst = f64::NEG_INFINITY;
    for (&t, mf) in m.times.iter().zip(&m.slices) {
        let chi = profile.chi(t);
        for p in 0..rho0.grid().len() {
            let mv = mf.vector(p);
            let a = mv.dot(&g1.vector(p)).abs() - c.c1 * c.c0 * chi.sqrt();
            let b = 0.5 * chi * mv.dot(&g2.vector(p)).abs() - 0.5 * c.c2 * c.c0 * chi.powf(1.5);
            worst = worst.max(a).max(b);
        }
    }
    Ok(worst)
}

/// Convenience: the uniform-in-time sample grid used for certification.
pub fn certification_times(t_end: f64, samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|i| t_end * i as f64 / (samples - 1) as f64)
        .collect()
}

pub fn density_grid_check(grid: SpatialGrid, rho0: &Field) -> Result<()> {
    if rho0.grid() != grid {
        return Err(Error::GridMismatch("density grid".into()));
    }
    check_density(rho0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(2, 32).unwrap()
    }

    #[test]
    fn internal_energy_examples() {
        let law = PressureLaw::polytropic(1.0, 2.0).unwrap();
        assert_eq!(law.internal_energy(1.3, 1.3).unwrap(), 0.0);
        let d = law.internal_energy(2.0, 1.0).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let law = PressureLaw::polytropic(0.7, 1.4).unwrap();
        for &r in &[0.3, 1.0, 2.5] {
            let a = law.internal_energy(r, 1.1).unwrap();
            let b = law.internal_energy_quadrature(r, 1.1).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
        assert!(law.internal_energy(0.0, 1.0).is_err());
    }

    #[test]
    fn internal_energy_is_increasing() {
        let law = PressureLaw::polytropic(1.0, 1.4).unwrap();
        let vals: Vec<f64> = (1..50)
            .map(|i| law.internal_energy(i as f64 * 0.1, 1.0).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn tabulated_law_reproduces_table_and_is_monotone() {
        let rho: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let p: Vec<f64> = rho.iter().map(|r| r * r).collect();
        let law = PressureLaw::Tabulated { rho: rho.clone(), p: p.clone() };
        law.validate().unwrap();
        for (r, pv) in rho.iter().zip(&p) {
            assert!((law.pressure(*r) - pv).abs() < 1e-14);
        }
        let xs: Vec<f64> = (1..400).map(|i| i as f64 * 0.0125).collect();
        assert!(xs.windows(2).all(|w| law.pressure(w[1]) > law.pressure(w[0])));
        assert!((law.pressure(1.1) - 1.21).abs() < 1e-2);
        let e = law.internal_energy(2.0, 1.0).unwrap();
        assert!((e - 1.0).abs() < 1e-3);
        let bad = PressureLaw::Tabulated { rho: vec![0.0, 1.0], p: vec![1.0, 0.5] };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constants_examples() {
        let g = grid();
        let law = PressureLaw::polytropic(1.0, 2.0).unwrap();
        let c = compute_constants(&Field::scalar_from_fn(g, |_| 1.0), &law).unwrap();
        assert!(c.c1 < 1e-12 && c.c2 < 1e-12 && c.big_c1 < 1e-12 && c.big_c2 < 1e-12);
        let rho = Field::scalar_from_fn(g, |x| 2.0 + (2.0 * PI * x[0]).sin());
        let c = compute_constants(&rho, &law).unwrap();
        // the grid hits x1 = 1/4 exactly
        assert!((c.c0 - 3f64.sqrt()).abs() < 1e-6);
        assert_eq!(c.big_c1, 2.0 * c.c1 * c.c0);
        assert_eq!(c.big_c2, c.c2 * c.c0);
        let grad_sup = spectral_gradient(&rho).norms().sup;
        let inv_min2 = rho.component(0).iter().map(|r| 1.0 / (r * r)).fold(0.0, f64::max);
        assert!(c.c2 <= grad_sup * inv_min2 + 1e-10);
        let bad = Field::scalar_from_fn(g, |x| (2.0 * PI * x[0]).sin());
        assert!(compute_constants(&bad, &law).is_err());
    }

    #[test]
    fn chi_branches() {
        let zero = AdmissibilityConstants::from_bounds(1.0, 0.0, 0.0);
        let p = chi_solve(2.0, &zero, 5.0).unwrap();
        assert_eq!(p.chi(3.0), 2.0);
        assert_eq!(maximal_time(&p, 1.0).unwrap(), 5.0);

        let lin = AdmissibilityConstants::from_bounds(1.0, 0.25, 0.0);
        let p = chi_solve(4.0, &lin, 10.0).unwrap();
        assert_eq!(p.branch, ChiBranch::Linear);
        assert!((p.sqrt_chi(1.0) - (2.0 - 0.25)).abs() < 1e-15);
        assert_eq!(p.chi(100.0), 0.0);
        let t = maximal_time(&p, 1.0).unwrap();
        assert!((t - 2.0 * (2.0 - 1.0) / 0.5).abs() < 1e-14);
        assert!(maximal_time(&p, 4.0).is_err());
    }

    #[test]
    fn chi_closed_form_matches_rk4() {
        let c = AdmissibilityConstants::from_bounds(1.3, 0.4, 0.6);
        let cf = chi_solve(3.0, &c, 5.0).unwrap();
        let ext = cf.extinction_time();
        let rk = chi_solve_rk4(3.0, &c, ext, 1e-4).unwrap();
        for i in 0..=200 {
            let t = 0.9 * ext * i as f64 / 200.0;
            let (a, b) = (cf.chi(t), rk.chi(t));
            assert!((a - b).abs() <= 1e-8 * a, "t={t} {a} {b}");
        }
        let ta = maximal_time(&cf, 1.0).unwrap();
        let tb = maximal_time_bisection(&cf, 1.0).unwrap();
        assert!((ta - tb).abs() < 1e-9);
    }

    #[test]
    fn chi_satisfies_ode_and_scales() {
        for c in [
            AdmissibilityConstants::from_bounds(1.0, 0.5, 0.0),
            AdmissibilityConstants::from_bounds(1.0, 0.0, 0.5),
            AdmissibilityConstants::from_bounds(1.0, 0.3, 0.4),
        ] {
            let p = chi_solve(2.5, &c, 1.0).unwrap();
            let end = p.extinction_time().min(3.0) * 0.9;
            let mut prev = f64::INFINITY;
            for i in 0..50 {
                let t = end * i as f64 / 49.0;
                let chi = p.chi(t);
                let res = p.derivative(t) + c.big_c1 * chi.sqrt() + c.big_c2 * chi.powf(1.5);
                assert!(res.abs() <= 1e-8);
                assert!(chi <= prev);
                prev = chi;
            }
            let doubled = AdmissibilityConstants::from_bounds(1.0, 2.0 * c.c1, 2.0 * c.c2);
            let q = chi_solve(2.5, &doubled, 1.0).unwrap();
            let (t1, t2) = (maximal_time(&p, 1.0).unwrap(), maximal_time(&q, 1.0).unwrap());
            assert!((t1 - 2.0 * t2).abs() < 1e-12 * t1);
        }
    }

    #[test]
    fn energy_residual_trivial_and_saturated_cases() {
        let g = grid();
        let law = PressureLaw::polytropic(1.0, 2.0).unwrap();
        let rho = Field::scalar_from_fn(g, |_| 1.5);
        let c = compute_constants(&rho, &law).unwrap();
        let prof = chi_solve(2.0, &c, 1.0).unwrap();
        let times = certification_times(1.0, 81);
        let tests = nonneg_tests(2, 0.0, 1.0, 32, 9);
        let zero = FieldFamily::zeros(times.clone(), g, FieldKind::Vector);
        let r = energy_residual(&rho, &zero, &prof, &law, &tests).unwrap();
        assert!(r.worst.abs() < 1e-14);

        // non-constant density, saturated momentum, χ from the ODE
        let rho = Field::scalar_from_fn(g, |x| 2.0 + 0.5 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let c = compute_constants(&rho, &law).unwrap();
        let prof = chi_solve(3.0, &c, 1.0).unwrap();
        let t_end = maximal_time(&prof, 0.5).unwrap().min(1.0);
        let times = certification_times(t_end, 81);
        let dir = Field::vector_from_fn(g, |x| Vector::from_slice(&[(2.0 * PI * x[1]).cos(), 0.7]));
        let m = saturated_family(&rho, &dir, &prof, &times);
        assert!(pointwise_bound_excess(&rho, &m, &prof, &law, &c).unwrap() <= 1e-12);
        let tests = nonneg_tests(2, 0.0, t_end, 32, 9);
        let r = energy_residual(&rho, &m, &prof, &law, &tests).unwrap();
        assert!(r.worst <= 1e-6, "{}", r.worst);
    }

    #[test]
    fn full_form_matches_reduced_for_divergence_free_momentum() {
        let g = SpatialGrid::new(2, 64).unwrap();
        let law = PressureLaw::polytropic(1.0, 2.0).unwrap();
        // density and momentum depend on x2 only; m along e1 is divergence-free
        let rho = Field::scalar_from_fn(g, |x| 2.0 + 0.3 * (2.0 * PI * x[1]).cos());
        let c = AdmissibilityConstants::from_bounds(1.0, 0.3, 0.2);
        let prof = chi_solve(2.0, &c, 1.0).unwrap();
        let times = certification_times(1.0, 161);
        let dir = Field::vector_from_fn(g, |_| Vector::from_slice(&[1.0, 0.0]));
        let m = saturated_family(&rho, &dir, &prof, &times);
        let tests = nonneg_tests(2, 0.0, 1.0, 8, 4);
        let r = energy_residual(&rho, &m, &prof, &law, &tests).unwrap();
        for (a, b) in r.reduced.iter().zip(&r.full) {
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{a} {b}");
        }
    }
}
