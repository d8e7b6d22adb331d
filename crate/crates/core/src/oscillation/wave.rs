//! Localized plane waves `A(∂)[φ_r · k⁻³ cos(k η·(y − y₀))]`, evaluated
//! pointwise in closed form or assembled on the grid with exact spectral
//! spatial derivatives.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cutoff::{Cutoff, MAX_DIM};
use super::potential::{potential_operator, OperatorSpec};
use crate::error::{Error, Result};
use crate::geometry::StateTriple;
use crate::linalg::{SymMatrix, Vector};
use crate::torus::spectral::fft_nd;
use crate::torus::{periodic_delta, Field, FieldFamily, FieldKind, SpatialGrid};

/// Parameters of one localized wave. The support is the ellipsoid
/// `|x − x₀|² / r² + (t − t₀)² / (κr)² < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveSpec {
    pub generators: (Vector, Vector),
    pub rho_local: f64,
    pub frequency: u32,
    pub center: Vector,
    pub center_time: f64,
    pub radius: f64,
    /// Time radius over space radius (`κ`).
    pub time_ratio: f64,
    pub smoothness: u32,
    pub amplitude: f64,
}

/// A wave ready for evaluation: spec, operator and cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalizedWave {
    spec: WaveSpec,
    op: OperatorSpec,
    cutoff: Cutoff,
    scales: [f64; MAX_DIM],
}

fn trig(order: usize, s: f64, c: f64) -> f64 {
    match order % 4 {
        0 => c,
        1 => -s,
        2 => -c,
        _ => s,
    }
}

impl LocalizedWave {
    pub fn new(op: OperatorSpec, spec: WaveSpec) -> Result<Self> {
        let n = op.n();
        let (c, d) = op.generators();
        if spec.center.dim() != n || (c - spec.generators.0).max_abs() > 0.0 || (d - spec.generators.1).max_abs() > 0.0 {
            return Err(Error::Precondition("wave spec does not match operator".into()));
        }
        if (c.norm_sq() - d.norm_sq()).abs() > 1e-12 * c.norm_sq().max(1.0) {
            return Err(Error::Precondition("|c| ≠ |d|".into()));
        }
        if !(spec.radius > 0.0 && spec.radius < 0.5) {
            return Err(Error::Precondition(format!(
                "radius {} does not fit the unit torus",
                spec.radius
            )));
        }
        if !(spec.time_ratio > 0.0) || spec.frequency == 0 || !spec.amplitude.is_finite() {
            return Err(Error::Precondition("time ratio, frequency or amplitude invalid".into()));
        }
        if op.eta()[..n].iter().all(|v| v.abs() < 1e-12) {
            return Err(Error::Precondition("η parallel to the time axis".into()));
        }
        let mut scales = [spec.radius; MAX_DIM];
        scales[n] = spec.radius * spec.time_ratio;
        Ok(LocalizedWave {
            cutoff: Cutoff::new(spec.smoothness),
            spec,
            op,
            scales,
        })
    }

    pub fn from_spec(spec: WaveSpec) -> Result<Self> {
        let op = potential_operator(&spec.generators.0, &spec.generators.1, spec.rho_local)?;
        LocalizedWave::new(op, spec)
    }

    pub fn spec(&self) -> &WaveSpec {
        &self.spec
    }

    pub fn operator(&self) -> &OperatorSpec {
        &self.op
    }

    pub fn eta(&self) -> &[f64] {
        self.op.eta()
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.spec.amplitude = amplitude;
        self
    }

    pub fn with_frequency(mut self, k: u32) -> Self {
        self.spec.frequency = k;
        self
    }

    pub fn time_radius(&self) -> f64 {
        self.spec.radius * self.spec.time_ratio
    }

    /// Space-time displacement from the centre (minimal image in space).
    fn offset(&self, x: &Vector, t: f64) -> [f64; MAX_DIM] {
        let n = self.op.n();
        let mut w = [0.0; MAX_DIM];
        for a in 0..n {
            w[a] = periodic_delta(x[a], self.spec.center[a]);
        }
        w[n] = t - self.spec.center_time;
        w
    }

    fn scaled_radius(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(&self.scales)
            .map(|(v, s)| (v / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn in_support(&self, x: &Vector, t: f64) -> bool {
        let w = self.offset(x, t);
        self.scaled_radius(&w[..self.op.dim()]) < 1.0
    }

    /// Spatial radius of the support section at time `t`, scaled by
    /// `level` (1 for the support, ½ for the inner ball).
    pub fn section_radius(&self, t: f64, level: f64) -> f64 {
        let s = (t - self.spec.center_time) / self.time_radius();
        let r2 = level * level - s * s;
        if r2 <= 0.0 {
            0.0
        } else {
            self.spec.radius * r2.sqrt()
        }
    }

    fn phase(&self, w: &[f64]) -> f64 {
        let k = self.spec.frequency as f64;
        k * w.iter().zip(self.op.eta()).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `∂^α Φ` for every cubic monomial, amplitude included.
    fn third_derivatives(&self, x: &Vector, t: f64) -> Option<Vec<f64>> {
        let d = self.op.dim();
        let w = self.offset(x, t);
        if self.scaled_radius(&w[..d]) >= 1.0 {
            return None;
        }
        let jet = self.cutoff.jet(&w[..d], &self.scales[..d]);
        let (s, c) = self.phase(&w[..d]).sin_cos();
        let k = self.spec.frequency as f64;
        let eta = self.op.eta();
        let kpow = [k.powi(-3), k.powi(-2), 1.0 / k, 1.0];
        let plateau = jet.grad.iter().all(|&g| g == 0.0) && jet.value == 1.0;
        let out = self
            .op
            .monomials()
            .iter()
            .map(|m| {
                if plateau {
                    return eta[m[0]] * eta[m[1]] * eta[m[2]] * s;
                }
                (0..8u8)
                    .map(|mask| {
                        let mut fa = [0usize; 3];
                        let mut nf = 0;
                        let mut g = 1.0;
                        let mut ng = 0;
                        for (bit, &axis) in m.iter().enumerate() {
                            if mask & (1 << bit) != 0 {
                                fa[nf] = axis;
                                nf += 1;
                            } else {
                                g *= eta[axis];
                                ng += 1;
                            }
                        }
                        jet.partial(&fa[..nf]) * g * kpow[ng] * trig(ng, s, c)
                    })
                    .sum::<f64>()
            })
            .map(|v| v * self.spec.amplitude)
            .collect();
        Some(out)
    }

    /// `(m̃, Ũ)` at a point, `q ≡ 0`.
    pub fn evaluate(&self, x: &Vector, t: f64) -> StateTriple {
        match self.third_derivatives(x, t) {
            Some(derivs) => self.op.to_state(&self.op.apply(&derivs)),
            None => StateTriple::zeros(self.op.n()),
        }
    }

    /// `φ_r · a · (m̄, Ū) sin(k η·(y − y₀))`.
    pub fn pure(&self, x: &Vector, t: f64) -> StateTriple {
        let d = self.op.dim();
        let w = self.offset(x, t);
        if self.scaled_radius(&w[..d]) >= 1.0 {
            return StateTriple::zeros(self.op.n());
        }
        let f = self.cutoff.jet(&w[..d], &self.scales[..d]).value;
        let scale = f * self.spec.amplitude * self.phase(&w[..d]).sin();
        let full: Vec<f64> = self.op.mbar().iter().map(|v| v * scale).collect();
        self.op.to_state(&full)
    }

    /// `∂_t^j Φ` for `j = 0..=3`, amplitude included.
    pub fn time_jet(&self, x: &Vector, t: f64) -> [f64; 4] {
        let d = self.op.dim();
        let n = self.op.n();
        let w = self.offset(x, t);
        if self.scaled_radius(&w[..d]) >= 1.0 {
            return [0.0; 4];
        }
        let jet = self.cutoff.jet(&w[..d], &self.scales[..d]);
        let f = [
            jet.value,
            jet.grad[n],
            jet.hess[n][n],
            jet.third[n][n][n],
        ];
        let (s, c) = self.phase(&w[..d]).sin_cos();
        let k = self.spec.frequency as f64;
        let et = self.op.eta()[n];
        let g: Vec<f64> = (0..4)
            .map(|m| k.powi(m as i32 - 3) * et.powi(m as i32) * trig(m, s, c))
            .collect();
        let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
        let mut out = [0.0; 4];
        for j in 0..4 {
            out[j] = (0..=j).map(|i| binom[j][i] * f[i] * g[j - i]).sum::<f64>() * self.spec.amplitude;
        }
        out
    }

    /// Grid points inside the support section at time `t`.
    pub fn support_points(&self, grid: SpatialGrid, t: f64) -> Vec<usize> {
        let r = self.section_radius(t, 1.0);
        if r == 0.0 {
            return Vec::new();
        }
        ball_points(grid, &self.spec.center, r)
    }
}

/// Grid indices within distance `< r` of `center` on the torus.
pub fn ball_points(grid: SpatialGrid, center: &Vector, r: f64) -> Vec<usize> {
    let n = grid.n;
    let np = grid.points as i64;
    let h = grid.spacing();
    let reach = ((r / h).ceil() as i64 + 1).min((np - 1) / 2);
    let base: Vec<i64> = (0..n).map(|a| (center[a] / h).round() as i64).collect();
    let width = (2 * reach + 1) as usize;
    let total = width.pow(n as u32);
    let mut out = Vec::new();
    let mut mi = [0usize; 3];
    for idx in 0..total {
        let mut rem = idx;
        let mut d2 = 0.0;
        for a in (0..n).rev() {
            let o = (rem % width) as i64 - reach;
            rem /= width;
            let i = (base[a] + o).rem_euclid(np);
            mi[a] = i as usize;
            let dx = periodic_delta(i as f64 * h, center[a]);
            d2 += dx * dx;
        }
        if d2 < r * r {
            out.push(grid.flat_index(&mi[..n]));
        }
    }
    out
}

/// Analytic samples of one wave at time `t`.
pub fn localized_wave(wave: &LocalizedWave, grid: SpatialGrid, t: f64) -> Result<(Field, Field)> {
    if grid.n != wave.op.n() {
        return Err(Error::GridMismatch("wave dimension differs from grid".into()));
    }
    let mut m = Field::zeros(grid, FieldKind::Vector);
    let mut u = Field::zeros(grid, FieldKind::SymMatrix);
    for p in wave.support_points(grid, t) {
        let z = wave.evaluate(&grid.point(p), t);
        m.set_vector(p, &z.m);
        u.set_matrix(p, &z.u);
    }
    Ok((m, u))
}

/// Sup-norm distance between the wave and its pure plane-wave part over
/// grid samples at the given times.
pub fn sup_deviation(wave: &LocalizedWave, grid: SpatialGrid, times: &[f64]) -> f64 {
    times
        .iter()
        .flat_map(|&t| {
            wave.support_points(grid, t).into_iter().map(move |p| {
                let x = grid.point(p);
                let diff = wave.evaluate(&x, t) - wave.pure(&x, t);
                diff.m.max_abs().max(diff.u.max_abs())
            })
        })
        .fold(0.0, f64::max)
}

fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    (0..order)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=order {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if order == 0 { 1.0 } else { p1 };
                dp = order as f64 * (x * p - p0) / (x * x - 1.0);
                let step = p / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        4 => PI * PI / 2.0,
        _ => unreachable!("dimension above four"),
    }
}

/// Volume of a ball of radius `r` in `n` dimensions.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    unit_ball_volume(n) * r.powi(n as i32)
}

/// `∫ |m̃(x, t)|² dx` over the inner section at time `t`, by a polar
/// product rule with `resolution` angular and `resolution/2` radial nodes.
pub fn oscillation_mass(wave: &LocalizedWave, t: f64, resolution: usize) -> f64 {
    let n = wave.op.n();
    let r = wave.section_radius(t, 0.5);
    if r == 0.0 || wave.spec.amplitude == 0.0 {
        return 0.0;
    }
    let radial = gauss_legendre((resolution / 2).max(4));
    let c = wave.spec.center;
    let point = |dir: &[f64], rr: f64| {
        let mut x = c;
        for a in 0..n {
            x[a] += rr * dir[a];
        }
        wave.evaluate(&x, t).m.norm_sq()
    };
    let mut total = 0.0;
    for &(xr, wr) in &radial {
        let rr = 0.5 * r * (xr + 1.0);
        let jac = 0.5 * r * wr * rr.powi(n as i32 - 1);
        let angular: f64 = if n == 2 {
            (0..resolution)
                .map(|i| {
                    let phi = 2.0 * PI * i as f64 / resolution as f64;
                    point(&[phi.cos(), phi.sin()], rr)
                })
                .sum::<f64>()
                * 2.0
                * PI
                / resolution as f64
        } else {
            gauss_legendre((resolution / 2).max(4))
                .iter()
                .map(|&(ct, wt)| {
                    let st = (1.0 - ct * ct).sqrt();
                    (0..resolution)
                        .map(|i| {
                            let phi = 2.0 * PI * i as f64 / resolution as f64;
                            point(&[st * phi.cos(), st * phi.sin(), ct], rr)
                        })
                        .sum::<f64>()
                        * wt
                        * 2.0
                        * PI
                        / resolution as f64
                })
                .sum()
        };
        total += jac * angular;
    }
    total
}

/// `½ |a m̄|² |B|` for the inner section at time `t`.
pub fn mass_limit(wave: &LocalizedWave, t: f64) -> f64 {
    let n = wave.op.n();
    let (c, d) = wave.op.generators();
    let mbar = (c - d) * wave.spec.amplitude;
    0.5 * mbar.norm_sq() * ball_volume(n, wave.section_radius(t, 0.5))
}

/// Per-monomial spatial multipliers `Π (2πi k_a)` and time orders.
struct MonomialTables {
    mult: Vec<Vec<Complex64>>,
    time_order: Vec<usize>,
}

fn monomial_tables(grid: SpatialGrid, monomials: &[[usize; 3]]) -> MonomialTables {
    let n = grid.n;
    let nyq = (grid.points / 2) as i64;
    let wavevectors: Vec<[i64; 3]> = (0..grid.len())
        .map(|p| {
            let mi = grid.multi_index(p);
            let mut k = [0i64; 3];
            for a in 0..n {
                k[a] = grid.wavenumber(mi[a]);
            }
            k
        })
        .collect();
    let mult = monomials
        .iter()
        .map(|m| {
            wavevectors
                .iter()
                .map(|k| {
                    if k[..n].iter().any(|v| v.abs() == nyq) {
                        return Complex64::new(0.0, 0.0);
                    }
                    m.iter()
                        .filter(|&&a| a < n)
                        .fold(Complex64::new(1.0, 0.0), |acc, &a| {
                            acc * Complex64::new(0.0, 2.0 * PI * k[a] as f64)
                        })
                })
                .collect()
        })
        .collect();
    let time_order = monomials
        .iter()
        .map(|m| m.iter().filter(|&&a| a == n).count())
        .collect();
    MonomialTables { mult, time_order }
}

/// Spectral assembly of a set of waves on one time slice.
pub struct SpectralAssembler {
    grid: SpatialGrid,
    tables: MonomialTables,
    entries: Vec<(usize, usize)>,
    packed: Vec<(usize, usize)>,
}

impl SpectralAssembler {
    pub fn new(grid: SpatialGrid) -> Self {
        let dim = grid.n + 1;
        SpectralAssembler {
            grid,
            tables: monomial_tables(grid, &super::potential::cubic_monomials(dim)),
            entries: super::potential::free_entries(dim),
            packed: SymMatrix::packed_pairs(grid.n).collect(),
        }
    }

    /// Free entries of `Σ waves` at time `t`, one grid array per entry, or
    /// `None` when no wave reaches this slice.
    pub fn slice(&self, waves: &[&LocalizedWave], t: f64) -> Option<Vec<Vec<f64>>> {
        let grid = self.grid;
        let len = grid.len();
        let zero = Complex64::new(0.0, 0.0);
        let norm = 1.0 / len as f64;
        let mut acc: Vec<Vec<Complex64>> = Vec::new();
        for wave in waves {
            let pts = wave.support_points(grid, t);
            if pts.is_empty() {
                continue;
            }
            if acc.is_empty() {
                acc = vec![vec![zero; len]; self.entries.len()];
            }
            let mut bufs = vec![vec![zero; len]; 4];
            for p in pts {
                let jet = wave.time_jet(&grid.point(p), t);
                for (b, v) in bufs.iter_mut().zip(jet) {
                    b[p] = Complex64::new(v * norm, 0.0);
                }
            }
            for b in &mut bufs {
                fft_nd(grid, b, false);
            }
            for (alpha, mult) in self.tables.mult.iter().enumerate() {
                let src = &bufs[self.tables.time_order[alpha]];
                let coeffs: Vec<(usize, f64)> = (0..self.entries.len())
                    .map(|e| (e, wave.op.entry_coefficients(e)[alpha]))
                    .filter(|(_, c)| *c != 0.0)
                    .collect();
                if coeffs.is_empty() {
                    continue;
                }
                for mode in 0..len {
                    let v = mult[mode] * src[mode];
                    if v == zero {
                        continue;
                    }
                    for &(e, c) in &coeffs {
                        acc[e][mode] += v * c;
                    }
                }
            }
        }
        if acc.is_empty() {
            return None;
        }
        Some(
            acc.into_iter()
                .map(|mut buf| {
                    fft_nd(grid, &mut buf, true);
                    buf.into_iter().map(|z| z.re).collect()
                })
                .collect(),
        )
    }

    /// Pointwise `(m̃, Ũ)` from a slice produced by [`Self::slice`].
    pub fn state_at(&self, slice: &[Vec<f64>], p: usize) -> StateTriple {
        let n = self.grid.n;
        let mut z = StateTriple::zeros(n);
        for (e, &(a, b)) in self.entries.iter().enumerate() {
            if b == n {
                z.m[a] = slice[e][p];
            } else {
                z.u.set(a, b, slice[e][p]);
            }
        }
        z
    }

    fn write(&self, slice: &[Vec<f64>], m: &mut Field, u: &mut Field) {
        let n = self.grid.n;
        for (e, &(a, b)) in self.entries.iter().enumerate() {
            if b == n {
                m.component_mut(a).copy_from_slice(&slice[e]);
            } else {
                let c = self.packed.iter().position(|&pq| pq == (a, b)).expect("packed entry");
                u.component_mut(c).copy_from_slice(&slice[e]);
            }
        }
    }
}

/// Sum of waves sampled on `grid × times`: time derivatives analytic,
/// spatial derivatives spectral with Nyquist modes removed, so that
/// `div m = 0` and `∂t m + div U = 0` hold exactly in coefficient space.
pub fn spectral_perturbation(
    waves: &[LocalizedWave],
    grid: SpatialGrid,
    times: &[f64],
) -> Result<(FieldFamily, FieldFamily)> {
    let mut m_fam = FieldFamily::zeros(times.to_vec(), grid, FieldKind::Vector);
    let mut u_fam = FieldFamily::zeros(times.to_vec(), grid, FieldKind::SymMatrix);
    if waves.iter().any(|w| w.op.n() != grid.n) {
        return Err(Error::GridMismatch("wave dimension differs from grid".into()));
    }
    let asm = SpectralAssembler::new(grid);
    let refs: Vec<&LocalizedWave> = waves.iter().collect();
    for (j, &t) in times.iter().enumerate() {
        if let Some(slice) = asm.slice(&refs, t) {
            asm.write(&slice, &mut m_fam.slices[j], &mut u_fam.slices[j]);
        }
    }
    Ok((m_fam, u_fam))
}
