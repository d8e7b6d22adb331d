//! Weak-form pairings against trigonometric test functions with compact
//! time profiles.
//!
//! Spatial integrals use the grid mean (exact for trigonometric integrands
//! below Nyquist); time integrals use the trapezoid rule on the family's
//! own samples.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{trapezoid_weights, Field, FieldFamily, FieldKind, SpatialGrid};
use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};

/// `θ(t) = (1 - s²)^16` with `s = (t - center) / half_width`, zero outside.
/// The high power keeps trapezoid sums of `θ'` near round-off once a
/// half-width spans about twenty samples.
const BUMP_POWER: i32 = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeBump {
    pub center: f64,
    pub half_width: f64,
}

impl TimeBump {
    /// Bump filling `[t0, t1]`.
    pub fn spanning(t0: f64, t1: f64) -> Self {
        TimeBump {
            center: 0.5 * (t0 + t1),
            half_width: 0.5 * (t1 - t0),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - s * s).powi(BUMP_POWER)
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            0.0
        } else {
            -2.0 * BUMP_POWER as f64 * s * (1.0 - s * s).powi(BUMP_POWER - 1) / self.half_width
        }
    }
}

/// `φ(x, t) = θ(t) · a · cos(2π k·x + phase)`; for scalar tests `a` has
/// length one.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub wavevector: [i64; 3],
    pub phase: f64,
    pub amplitude: Vector,
    pub bump: TimeBump,
}

impl TestFunction {
    fn trig_tables(&self, grid: SpatialGrid) -> (Vec<f64>, Vec<f64>) {
        let k = self.wavevector;
        (0..grid.len())
            .map(|p| {
                let x = grid.point(p);
                let arg = 2.0
                    * PI
                    * (0..grid.n).map(|a| k[a] as f64 * x[a]).sum::<f64>()
                    + self.phase;
                (arg.cos(), arg.sin())
            })
            .unzip()
    }

    fn two_pi_k(&self, n: usize) -> Vector {
        let mut v = Vector::zeros(n);
        for a in 0..n {
            v[a] = 2.0 * PI * self.wavevector[a] as f64;
        }
        v
    }
}

struct Tables {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Tables {
    fn new(test: &TestFunction, grid: SpatialGrid) -> Self {
        let (cos, sin) = test.trig_tables(grid);
        Tables { cos, sin }
    }

    fn means(&self, values: &[f64]) -> (f64, f64) {
        let len = values.len() as f64;
        let c = values.iter().zip(&self.cos).map(|(v, c)| v * c).sum::<f64>() / len;
        let s = values.iter().zip(&self.sin).map(|(v, s)| v * s).sum::<f64>() / len;
        (c, s)
    }
}

fn check_family(f: &FieldFamily, times: &[f64], grid: SpatialGrid, kind: FieldKind) -> Result<()> {
    if f.times.len() != times.len() || f.times.iter().zip(times).any(|(a, b)| a != b) {
        return Err(Error::GridMismatch("time samples differ between families".into()));
    }
    if f.slices.iter().any(|s| s.grid() != grid) {
        return Err(Error::GridMismatch("spatial grids differ".into()));
    }
    if f.slices.iter().any(|s| s.kind() != kind) {
        return Err(Error::GridMismatch(format!("expected {kind:?} slices")));
    }
    Ok(())
}

/// `∫∫ m·φ` for a vector family.
pub fn weak_pairing(field: &FieldFamily, test: &TestFunction) -> Result<f64> {
    let grid = field.grid();
    check_family(field, &field.times, grid, FieldKind::Vector)?;
    let tables = Tables::new(test, grid);
    let w = trapezoid_weights(&field.times);
    let mut acc = 0.0;
    for (i, slice) in field.slices.iter().enumerate() {
        let th = test.bump.value(field.times[i]);
        if th == 0.0 {
            continue;
        }
        let spatial: f64 = (0..grid.n)
            .map(|a| test.amplitude[a] * tables.means(slice.component(a)).0)
            .sum();
        acc += w[i] * th * spatial;
    }
    Ok(acc)
}

/// Momentum residual `∫∫ m·∂tφ + U:∇φ + q div φ`, with the scalar `q`
/// family optional (treated as zero when absent).
pub fn momentum_residual(
    m: &FieldFamily,
    u: &FieldFamily,
    q: Option<&FieldFamily>,
    test: &TestFunction,
) -> Result<f64> {
    let grid = m.grid();
    let n = grid.n;
    check_family(m, &m.times, grid, FieldKind::Vector)?;
    check_family(u, &m.times, grid, FieldKind::SymMatrix)?;
    if let Some(q) = q {
        check_family(q, &m.times, grid, FieldKind::Scalar)?;
    }
    let tables = Tables::new(test, grid);
    let w = trapezoid_weights(&m.times);
    let kk = test.two_pi_k(n);
    let a = &test.amplitude;
    let a_dot_k = a.dot(&kk);
    let mut acc = 0.0;
    for (i, &t) in m.times.iter().enumerate() {
        let th = test.bump.value(t);
        let dth = test.bump.derivative(t);
        if th == 0.0 && dth == 0.0 {
            continue;
        }
        let mut val = 0.0;
        for c in 0..n {
            val += dth * a[c] * tables.means(m.slices[i].component(c)).0;
        }
        // ∂_j φ_i = -θ a_i (2πk_j) sin(...)
        for (c, (r, s)) in SymMatrix::packed_pairs(n).enumerate() {
            let sin_mean = tables.means(u.slices[i].component(c)).1;
            let weight = if r == s {
                a[r] * kk[s]
            } else {
                a[r] * kk[s] + a[s] * kk[r]
            };
            val -= th * weight * sin_mean;
        }
        if let Some(q) = q {
            val -= th * a_dot_k * tables.means(q.slices[i].component(0)).1;
        }
        acc += w[i] * val;
    }
    Ok(acc)
}

/// Mass residual `∫∫ ρ ∂tψ + m·∇ψ` for a scalar test (`amplitude[0]`
/// scales ψ).
pub fn mass_residual(rho: &FieldFamily, m: &FieldFamily, test: &TestFunction) -> Result<f64> {
    let grid = m.grid();
    check_family(m, &m.times, grid, FieldKind::Vector)?;
    check_family(rho, &m.times, grid, FieldKind::Scalar)?;
    let tables = Tables::new(test, grid);
    let w = trapezoid_weights(&m.times);
    let kk = test.two_pi_k(grid.n);
    let amp = test.amplitude[0];
    let mut acc = 0.0;
    for (i, &t) in m.times.iter().enumerate() {
        let th = test.bump.value(t);
        let dth = test.bump.derivative(t);
        let mut val = dth * tables.means(rho.slices[i].component(0)).0;
        for c in 0..grid.n {
            val -= th * kk[c] * tables.means(m.slices[i].component(c)).1;
        }
        acc += w[i] * amp * val;
    }
    Ok(acc)
}

/// Deterministic set of vector tests on `[t0, t1]`: low wavevectors, two
/// phases, random unit amplitudes and bumps inside the interval.
pub fn standard_vector_tests(n: usize, t0: f64, t1: f64, count: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = t1 - t0;
    (0..count)
        .map(|i| {
            let mut k = [0i64; 3];
            for slot in k.iter_mut().take(n) {
                *slot = rng.gen_range(-2..=2);
            }
            let mut a = Vector::zeros(n);
            for c in 0..n {
                a[c] = rng.gen_range(-1.0..1.0);
            }
            let norm = a.norm().max(1e-3);
            let half_width = len * rng.gen_range(0.25..0.5);
            let center = rng.gen_range(t0 + half_width..=t1 - half_width);
            TestFunction {
                wavevector: k,
                phase: if i % 2 == 0 { 0.0 } else { 0.5 * PI },
                amplitude: a * (1.0 / norm),
                bump: TimeBump { center, half_width },
            }
        })
        .collect()
}

/// Scalar tests for the mass equation.
pub fn standard_scalar_tests(n: usize, t0: f64, t1: f64, count: usize, seed: u64) -> Vec<TestFunction> {
    standard_vector_tests(n, t0, t1, count, seed)
        .into_iter()
        .map(|mut t| {
            t.amplitude = Vector::from_slice(&[1.0]);
            t
        })
        .collect()
}

/// A constant-in-time family with `[t0, t1]` sampled like `times`.
pub fn steady_family(times: &[f64], field: &Field) -> FieldFamily {
    FieldFamily::constant(times.to_vec(), field)
}
