//! Discrete Fourier views of grid fields and exact spectral derivatives.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::{Field, FieldKind, SpatialGrid};
use crate::linalg::SymMatrix;

thread_local! {
    static PLANNER: RefCell<(FftPlanner<f64>, BTreeMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), BTreeMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let (planner, cache) = &mut *p.borrow_mut();
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                let dir = if inverse {
                    FftDirection::Inverse
                } else {
                    FftDirection::Forward
                };
                planner.plan_fft(len, dir)
            })
            .clone()
    })
}

/// In-place unnormalized n-dimensional FFT over a row-major buffer.
pub(crate) fn fft_nd(grid: SpatialGrid, buf: &mut [Complex64], inverse: bool) {
    let n = grid.points;
    let fft = plan(n, inverse);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..grid.n {
        let stride = n.pow((grid.n - 1 - axis) as u32);
        let outer = n.pow(axis as u32);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = buf[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    buf[base + j * stride] = *v;
                }
            }
        }
    }
}

/// Fourier coefficients of a real scalar field, normalized so that
/// `f(x) = Σ_k c_k exp(2πi k·x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    grid: SpatialGrid,
    data: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Coefficient at wavevector `k` (components in `-N/2..N/2`).
    pub fn get(&self, k: &[i64]) -> Complex64 {
        let n = self.grid.points as i64;
        let mut mi = [0usize; 3];
        for a in 0..self.grid.n {
            mi[a] = k[a].rem_euclid(n) as usize;
        }
        self.data[self.grid.flat_index(&mi)]
    }

    /// Signed wavevector of the coefficient stored at flat index `idx`.
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        wavevector(self.grid, idx)
    }

    /// Largest `|c_k - conj(c_{-k})|`; zero for coefficients of a real field.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.data.len())
            .map(|idx| {
                let k = self.wavevector(idx);
                let neg = [-k[0], -k[1], -k[2]];
                (self.data[idx] - self.get(&neg).conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    /// L2 norm on the torus via Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Multiply each coefficient by `m(k)`.
    pub fn multiply(&self, m: impl Fn(&[i64; 3]) -> Complex64) -> SpectralCoeffs {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(idx, c)| c * m(&self.wavevector(idx)))
            .collect();
        SpectralCoeffs {
            grid: self.grid,
            data,
        }
    }
}

pub(crate) fn wavevector(grid: SpatialGrid, idx: usize) -> [i64; 3] {
    let mi = grid.multi_index(idx);
    let mut k = [0i64; 3];
    for a in 0..grid.n {
        k[a] = grid.wavenumber(mi[a]);
    }
    k
}

/// Transform of a single real component.
pub fn forward_component(grid: SpatialGrid, values: &[f64]) -> SpectralCoeffs {
    let scale = 1.0 / grid.len() as f64;
    let mut buf: Vec<Complex64> = values
        .iter()
        .map(|&v| Complex64::new(v * scale, 0.0))
        .collect();
    fft_nd(grid, &mut buf, false);
    SpectralCoeffs { grid, data: buf }
}

/// Forward transform of a scalar field (or the first component of any field).
pub fn forward_transform(f: &Field) -> SpectralCoeffs {
    forward_component(f.grid(), f.component(0))
}

/// Real part of the inverse transform.
pub fn inverse_transform(c: &SpectralCoeffs) -> Field {
    let mut buf = c.data.clone();
    fft_nd(c.grid, &mut buf, true);
    let data = buf.into_iter().map(|z| z.re).collect();
    Field::from_data(c.grid, FieldKind::Scalar, data).expect("length matches grid")
}

/// Spectral multiplier of `∂^β`, with the Nyquist mode dropped on axes
/// differentiated an odd number of times.
pub fn derivative_multiplier(grid: SpatialGrid, order: &[usize; 3], k: &[i64; 3]) -> Complex64 {
    let nyq = (grid.points / 2) as i64;
    let mut m = Complex64::new(1.0, 0.0);
    for a in 0..grid.n {
        let p = order[a];
        if p == 0 {
            continue;
        }
        if k[a].abs() == nyq && p % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        m *= Complex64::new(0.0, 2.0 * PI * k[a] as f64).powu(p as u32);
    }
    m
}

/// Apply `∂^β` to a real component via its coefficients.
pub fn derivative_of(c: &SpectralCoeffs, order: [usize; 3]) -> Vec<f64> {
    let d = c.multiply(|k| derivative_multiplier(c.grid, &order, k));
    inverse_transform(&d).data().to_vec()
}

fn axis_order(axis: usize) -> [usize; 3] {
    let mut o = [0; 3];
    o[axis] = 1;
    o
}

pub fn spectral_gradient(f: &Field) -> Field {
    let grid = f.grid();
    let c = forward_transform(f);
    let mut out = Field::zeros(grid, FieldKind::Vector);
    for a in 0..grid.n {
        out.component_mut(a)
            .copy_from_slice(&derivative_of(&c, axis_order(a)));
    }
    out
}

/// Divergence of a vector field.
pub fn spectral_divergence(v: &Field) -> Field {
    let grid = v.grid();
    let mut acc = SpectralCoeffs {
        grid,
        data: vec![Complex64::new(0.0, 0.0); grid.len()],
    };
    for a in 0..grid.n {
        let c = forward_component(grid, v.component(a));
        let order = axis_order(a);
        for (idx, z) in acc.data.iter_mut().enumerate() {
            let k = wavevector(grid, idx);
            *z += c.data[idx] * derivative_multiplier(grid, &order, &k);
        }
    }
    inverse_transform(&acc)
}

/// Row-wise divergence `(div U)_i = Σ_j ∂_j U_ij` of a symmetric matrix field.
pub fn spectral_divergence_matrix(u: &Field) -> Field {
    let grid = u.grid();
    let n = grid.n;
    let zero = Complex64::new(0.0, 0.0);
    let mut rows = vec![vec![zero; grid.len()]; n];
    for (c, (i, j)) in SymMatrix::packed_pairs(n).enumerate() {
        let coeffs = forward_component(grid, u.component(c));
        for idx in 0..grid.len() {
            let k = wavevector(grid, idx);
            let z = coeffs.data[idx];
            rows[i][idx] += z * derivative_multiplier(grid, &axis_order(j), &k);
            if i != j {
                rows[j][idx] += z * derivative_multiplier(grid, &axis_order(i), &k);
            }
        }
    }
    let mut out = Field::zeros(grid, FieldKind::Vector);
    for (i, row) in rows.into_iter().enumerate() {
        let f = inverse_transform(&SpectralCoeffs { grid, data: row });
        out.component_mut(i).copy_from_slice(f.data());
    }
    out
}

pub fn spectral_laplacian(f: &Field) -> Field {
    let c = forward_transform(f);
    let d = c.multiply(|k| {
        let k2: f64 = k.iter().map(|&x| (x * x) as f64).sum();
        Complex64::new(-4.0 * PI * PI * k2, 0.0)
    });
    inverse_transform(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use proptest::prelude::*;

    fn grid(n: usize, pts: usize) -> SpatialGrid {
        SpatialGrid::new(n, pts).unwrap()
    }

    fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_field_has_zero_coefficients() {
        let g = grid(2, 16);
        let c = forward_transform(&Field::zeros(g, FieldKind::Scalar));
        assert!(c.as_slice().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn cosine_coefficients() {
        let g = grid(2, 16);
        let f = Field::scalar_from_fn(g, |x| (2.0 * PI * x[0]).cos());
        let c = forward_transform(&f);
        for idx in 0..g.len() {
            let k = c.wavevector(idx);
            let expect = if k[1] == 0 && k[0].abs() == 1 { 0.5 } else { 0.0 };
            assert!((c.as_slice()[idx] - Complex64::new(expect, 0.0)).norm() < 1e-14);
        }
        assert!((c.get(&[-1, 0, 0]).re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gradient_of_constant_and_sine() {
        let g = grid(2, 32);
        let c = Field::scalar_from_fn(g, |_| 3.5);
        assert!(spectral_gradient(&c).norms().sup < 1e-12);
        let s = Field::scalar_from_fn(g, |x| (2.0 * PI * x[0]).sin());
        let grad = spectral_gradient(&s);
        let expect = Field::vector_from_fn(g, |x| {
            Vector::from_slice(&[2.0 * PI * (2.0 * PI * x[0]).cos(), 0.0])
        });
        assert!(sup_diff(grad.data(), expect.data()) < 1e-12);
    }

    #[test]
    fn gradient_of_cosine_product_3d() {
        let g = grid(3, 16);
        let f = Field::scalar_from_fn(g, |x| {
            (2.0 * PI * x[0]).cos() * (4.0 * PI * x[1]).cos() * (6.0 * PI * x[2]).cos()
        });
        let grad = spectral_gradient(&f);
        let expect = Field::vector_from_fn(g, |x| {
            let (c0, c1, c2) = (
                (2.0 * PI * x[0]).cos(),
                (4.0 * PI * x[1]).cos(),
                (6.0 * PI * x[2]).cos(),
            );
            let (s0, s1, s2) = (
                (2.0 * PI * x[0]).sin(),
                (4.0 * PI * x[1]).sin(),
                (6.0 * PI * x[2]).sin(),
            );
            Vector::from_slice(&[
                -2.0 * PI * s0 * c1 * c2,
                -4.0 * PI * c0 * s1 * c2,
                -6.0 * PI * c0 * c1 * s2,
            ])
        });
        assert!(sup_diff(grad.data(), expect.data()) < 1e-10);
    }

    #[test]
    fn curl_fields_are_divergence_free() {
        let g = grid(2, 32);
        let psi = |x: &Vector| (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos();
        let v = Field::vector_from_fn(g, |x| {
            let d1 = 2.0 * PI * (2.0 * PI * x[0]).cos() * (4.0 * PI * x[1]).cos();
            let d2 = -4.0 * PI * (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).sin();
            let _ = psi(x);
            Vector::from_slice(&[-d2, d1])
        });
        assert!(spectral_divergence(&v).norms().sup < 1e-12);
    }

    #[test]
    fn matrix_divergence_of_constant_is_zero() {
        let g = grid(2, 16);
        let u = Field::matrix_from_fn(g, |_| SymMatrix::from_rows(&[&[1.0, 2.0], &[2.0, -1.0]]));
        assert!(spectral_divergence_matrix(&u).norms().sup < 1e-12);
    }

    #[test]
    fn matrix_divergence_row_wise() {
        let g = grid(2, 32);
        // U = [[a, b], [b, -a]], a = sin(2πx1), b = cos(2πx2)
        let u = Field::matrix_from_fn(g, |x| {
            let a = (2.0 * PI * x[0]).sin();
            let b = (2.0 * PI * x[1]).cos();
            SymMatrix::from_rows(&[&[a, b], &[b, -a]])
        });
        let d = spectral_divergence_matrix(&u);
        let expect = Field::vector_from_fn(g, |x| {
            Vector::from_slice(&[
                2.0 * PI * (2.0 * PI * x[0]).cos() - 2.0 * PI * (2.0 * PI * x[1]).sin(),
                0.0,
            ])
        });
        assert!(sup_diff(d.data(), expect.data()) < 1e-11);
    }

    fn smooth_random(g: SpatialGrid, coeffs: &[(i64, i64, f64, f64)]) -> Field {
        Field::scalar_from_fn(g, |x| {
            coeffs
                .iter()
                .map(|&(k1, k2, a, ph)| {
                    a * (2.0 * PI * (k1 as f64 * x[0] + k2 as f64 * x[1]) + ph).cos()
                })
                .sum()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn round_trip_and_parseval(
            coeffs in proptest::collection::vec((-6i64..7, -6i64..7, -1.0f64..1.0, 0.0f64..6.3), 1..6)
        ) {
            let g = grid(2, 16);
            let f = smooth_random(g, &coeffs);
            let c = forward_transform(&f);
            let back = inverse_transform(&c);
            prop_assert!(sup_diff(f.data(), back.data()) < 1e-12);
            prop_assert!((c.l2_norm() - f.norms().l2).abs() < 1e-10);
            prop_assert!(c.hermitian_defect() < 1e-12);
        }

        #[test]
        fn divergence_of_gradient_is_laplacian(
            coeffs in proptest::collection::vec((-5i64..6, -5i64..6, -1.0f64..1.0, 0.0f64..6.3), 1..6)
        ) {
            let g = grid(2, 16);
            let f = smooth_random(g, &coeffs);
            let a = spectral_divergence(&spectral_gradient(&f));
            let b = spectral_laplacian(&f);
            prop_assert!(sup_diff(a.data(), b.data()) < 1e-10 * (1.0 + b.norms().sup));
        }
    }
}
