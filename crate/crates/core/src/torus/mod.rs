//! Periodic fields on the unit torus `[0,1]^n`.
//!
//! Fields live on a uniform collocation grid (no duplicated boundary layer);
//! spectral views are computed on demand. Time is a plain uniform sample
//! axis, never transformed.

pub mod dump;
pub mod spectral;
pub mod weak;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};

pub use spectral::{
    forward_transform, inverse_transform, spectral_divergence, spectral_divergence_matrix,
    spectral_gradient, spectral_laplacian, SpectralCoeffs,
};

/// Spatial part of the grid: dimension `n` and `points` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub n: usize,
    pub points: usize,
}

impl SpatialGrid {
    pub fn new(n: usize, points: usize) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidGrid(format!("dimension {n} not in 2..=3")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "{points} points per axis; need a power of two >= 8"
            )));
        }
        Ok(SpatialGrid { n, points })
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.points as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of a flat (row-major) index.
    #[inline]
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.n).rev() {
            out[a] = idx % self.points;
            idx /= self.points;
        }
        out
    }

    #[inline]
    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi[..self.n].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Coordinates of a grid point.
    #[inline]
    pub fn point(&self, idx: usize) -> Vector {
        let mi = self.multi_index(idx);
        let mut x = Vector::zeros(self.n);
        for a in 0..self.n {
            x[a] = mi[a] as f64 * self.spacing();
        }
        x
    }

    /// Signed wavenumber for FFT index `i` along one axis.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.points as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn components(&self, kind: FieldKind) -> usize {
        match kind {
            FieldKind::Scalar => 1,
            FieldKind::Vector => self.n,
            FieldKind::SymMatrix => SymMatrix::packed_len(self.n),
        }
    }

    pub fn kind_for_components(&self, count: usize) -> Option<FieldKind> {
        [FieldKind::Scalar, FieldKind::Vector, FieldKind::SymMatrix]
            .into_iter()
            .find(|&k| self.components(k) == count)
    }
}

/// Full grid specification: space plus a uniform time step and horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub space: SpatialGrid,
    pub dt: f64,
    pub horizon: f64,
}

impl GridSpec {
    pub fn new(n: usize, points: usize, dt: f64, horizon: f64) -> Result<Self> {
        let space = SpatialGrid::new(n, points)?;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidGrid(format!("horizon {horizon} must be > 0")));
        }
        if !(dt > 0.0) || dt > horizon {
            return Err(Error::InvalidGrid(format!("time step {dt} not in (0, T]")));
        }
        Ok(GridSpec { space, dt, horizon })
    }

    /// Uniform samples covering `[t0, t1]`; the step is adjusted down so
    /// that both ends are hit exactly.
    pub fn time_samples(&self, t0: f64, t1: f64) -> Vec<f64> {
        let steps = ((t1 - t0) / self.dt - 1e-9).ceil().max(1.0) as usize;
        let h = (t1 - t0) / steps as f64;
        (0..=steps).map(|i| t0 + i as f64 * h).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Scalar,
    Vector,
    SymMatrix,
}

/// A real periodic field sampled on the grid. Component-major storage:
/// component `c` at point `p` lives at `c * grid.len() + p`. Symmetric
/// matrices store the packed upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: SpatialGrid,
    kind: FieldKind,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: SpatialGrid, kind: FieldKind) -> Self {
        Field {
            grid,
            kind,
            data: vec![0.0; grid.components(kind) * grid.len()],
        }
    }

    pub fn from_data(grid: SpatialGrid, kind: FieldKind, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.components(kind) * grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {:?} field on {} points",
                data.len(),
                kind,
                grid.len()
            )));
        }
        Ok(Field { grid, kind, data })
    }

    /// Sample a scalar function of position.
    pub fn scalar_from_fn(grid: SpatialGrid, f: impl Fn(&Vector) -> f64) -> Self {
        let data = (0..grid.len()).map(|p| f(&grid.point(p))).collect();
        Field {
            grid,
            kind: FieldKind::Scalar,
            data,
        }
    }

    pub fn vector_from_fn(grid: SpatialGrid, f: impl Fn(&Vector) -> Vector) -> Self {
        let mut out = Field::zeros(grid, FieldKind::Vector);
        for p in 0..grid.len() {
            out.set_vector(p, &f(&grid.point(p)));
        }
        out
    }

    pub fn matrix_from_fn(grid: SpatialGrid, f: impl Fn(&Vector) -> SymMatrix) -> Self {
        let mut out = Field::zeros(grid, FieldKind::SymMatrix);
        for p in 0..grid.len() {
            out.set_matrix(p, &f(&grid.point(p)));
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    #[inline]
    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.grid.components(self.kind)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[f64] {
        let len = self.grid.len();
        &self.data[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let len = self.grid.len();
        &mut self.data[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn scalar(&self, p: usize) -> f64 {
        self.data[p]
    }

    #[inline]
    pub fn vector(&self, p: usize) -> Vector {
        let len = self.grid.len();
        let mut v = Vector::zeros(self.grid.n);
        for a in 0..self.grid.n {
            v[a] = self.data[a * len + p];
        }
        v
    }

    #[inline]
    pub fn set_vector(&mut self, p: usize, v: &Vector) {
        let len = self.grid.len();
        for a in 0..self.grid.n {
            self.data[a * len + p] = v[a];
        }
    }

    #[inline]
    pub fn matrix(&self, p: usize) -> SymMatrix {
        let len = self.grid.len();
        let mut packed = [0.0; 6];
        for (c, slot) in packed.iter_mut().enumerate().take(self.components()) {
            *slot = self.data[c * len + p];
        }
        SymMatrix::from_packed(self.grid.n, &packed[..self.components()])
    }

    #[inline]
    pub fn set_matrix(&mut self, p: usize, m: &SymMatrix) {
        let len = self.grid.len();
        let mut packed = [0.0; 6];
        m.to_packed(&mut packed);
        for (c, v) in packed.iter().enumerate().take(self.components()) {
            self.data[c * len + p] = *v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Field) {
        assert_eq!(self.kind, other.kind);
        assert_eq!(self.grid, other.grid);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            kind: self.kind,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Mean over the torus of a scalar field (exact for trigonometric
    /// polynomials below Nyquist).
    pub fn mean(&self) -> f64 {
        self.component(0).iter().sum::<f64>() / self.grid.len() as f64
    }

    /// Sup- and L2-norms, using the pointwise Euclidean (vectors) or
    /// Frobenius (matrices, counting both off-diagonal entries) magnitude.
    pub fn norms(&self) -> Norms {
        let len = self.grid.len();
        let n = self.grid.n;
        let mut sup = 0.0f64;
        let mut sq = 0.0;
        for p in 0..len {
            let mag2 = match self.kind {
                FieldKind::Scalar => self.data[p] * self.data[p],
                FieldKind::Vector => (0..n).map(|a| self.data[a * len + p].powi(2)).sum(),
                FieldKind::SymMatrix => {
                    let m = self.matrix(p);
                    m.frobenius().powi(2)
                }
            };
            sup = sup.max(mag2.sqrt());
            sq += mag2;
        }
        Norms {
            sup,
            l2: (sq / len as f64).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub sup: f64,
    pub l2: f64,
}

/// A field sampled at increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFamily {
    pub times: Vec<f64>,
    pub slices: Vec<Field>,
}

impl FieldFamily {
    pub fn constant(times: Vec<f64>, field: &Field) -> Self {
        let slices = vec![field.clone(); times.len()];
        FieldFamily { times, slices }
    }

    pub fn zeros(times: Vec<f64>, grid: SpatialGrid, kind: FieldKind) -> Self {
        let slices = vec![Field::zeros(grid, kind); times.len()];
        FieldFamily { times, slices }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn grid(&self) -> SpatialGrid {
        self.slices[0].grid()
    }

    pub fn kind(&self) -> FieldKind {
        self.slices[0].kind()
    }

    /// Trapezoid weights for the time samples.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.times)
    }
}

pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let nt = times.len();
    let mut w = vec![0.0; nt];
    for i in 0..nt.saturating_sub(1) {
        let h = times[i + 1] - times[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Minimal-image displacement on the unit torus, per axis.
#[inline]
pub fn periodic_delta(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - d.round()
}
