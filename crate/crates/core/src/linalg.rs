//! Vectors and symmetric matrices of dimension 2 or 3, stored inline.
//!
//! Eigenvalues use closed forms (quadratic formula in 2-D, the trigonometric
//! method in 3-D) so that results are exact up to round-off and fully
//! deterministic. Eigenvectors are only needed by the hull decomposition and
//! come from `nalgebra`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector {
    dim: usize,
    c: [f64; MAX_DIM],
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} unsupported");
        Vector {
            dim,
            c: [0.0; MAX_DIM],
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut out = Vector::zeros(v.len());
        out.c[..v.len()].copy_from_slice(v);
        out
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = Vector::zeros(dim);
        v.c[axis] = 1.0;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.c[..self.dim]
    }

    #[inline]
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        (0..self.dim).map(|i| self.c[i] * other.c[i]).sum()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = String;

    fn try_from(v: Vec<f64>) -> Result<Self, String> {
        if (1..=MAX_DIM).contains(&v.len()) {
            Ok(Vector::from_slice(&v))
        } else {
            Err(format!("vector of length {} unsupported", v.len()))
        }
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.as_slice().to_vec()
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.dim);
        &self.c[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.dim);
        &mut self.c[i]
    }
}

impl Add for Vector {
    type Output = Vector;
    #[inline]
    fn add(mut self, rhs: Vector) -> Vector {
        for i in 0..self.dim {
            self.c[i] += rhs.c[i];
        }
        self
    }
}

impl Sub for Vector {
    type Output = Vector;
    #[inline]
    fn sub(mut self, rhs: Vector) -> Vector {
        for i in 0..self.dim {
            self.c[i] -= rhs.c[i];
        }
        self
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    #[inline]
    fn mul(mut self, s: f64) -> Vector {
        for i in 0..self.dim {
            self.c[i] *= s;
        }
        self
    }
}

impl Neg for Vector {
    type Output = Vector;
    #[inline]
    fn neg(self) -> Vector {
        self * -1.0
    }
}

/// Symmetric matrix of dimension 2 or 3, full storage kept symmetric by
/// every mutator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    a: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} unsupported");
        SymMatrix {
            dim,
            a: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.a[i][i] = x;
        }
        m
    }

    /// `v ⊗ v`.
    pub fn outer(v: &Vector) -> Self {
        let mut m = SymMatrix::zeros(v.dim());
        for i in 0..v.dim() {
            for j in 0..v.dim() {
                m.a[i][j] = v[i] * v[j];
            }
        }
        m
    }

    /// Symmetrized `(v ⊗ w + w ⊗ v) / 2`.
    pub fn sym_outer(v: &Vector, w: &Vector) -> Self {
        let mut m = SymMatrix::zeros(v.dim());
        for i in 0..v.dim() {
            for j in 0..v.dim() {
                m.a[i][j] = 0.5 * (v[i] * w[j] + w[i] * v[j]);
            }
        }
        m
    }

    /// Build from row-major entries; the upper triangle wins.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, rows[i][j]);
            }
        }
        m
    }

    /// Number of independent entries, `dim (dim + 1) / 2`.
    pub fn packed_len(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    /// Upper-triangle index pairs in packed order.
    pub fn packed_pairs(dim: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..dim).flat_map(move |i| (i..dim).map(move |j| (i, j)))
    }

    pub fn from_packed(dim: usize, packed: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for ((i, j), &v) in SymMatrix::packed_pairs(dim).zip(packed) {
            m.set(i, j, v);
        }
        m
    }

    pub fn to_packed(&self, out: &mut [f64]) {
        for ((i, j), o) in SymMatrix::packed_pairs(self.dim).zip(out.iter_mut()) {
            *o = self.a[i][j];
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.a[i][i]).sum()
    }

    /// Remove the trace: `S - tr(S)/dim I`.
    pub fn trace_free(mut self) -> Self {
        let t = self.trace() / self.dim as f64;
        for i in 0..self.dim {
            self.a[i][i] -= t;
        }
        self
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim);
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.a[i][j] * v[j]).sum();
        }
        out
    }

    /// `vᵀ S w`.
    pub fn bilinear(&self, v: &Vector, w: &Vector) -> f64 {
        v.dot(&self.mul_vec(w))
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max(self.a[i][j].abs());
            }
        }
        m
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.a[i][j] * self.a[i][j];
            }
        }
        s.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.a[i][j].is_finite()))
    }

    /// Eigenvalues in descending order, closed form.
    pub fn eigenvalues(&self) -> Vector {
        match self.dim {
            1 => Vector::from_slice(&[self.a[0][0]]),
            2 => {
                let (a, b, d) = (self.a[0][0], self.a[0][1], self.a[1][1]);
                let mean = 0.5 * (a + d);
                let r = (0.5 * (a - d)).hypot(b);
                Vector::from_slice(&[mean + r, mean - r])
            }
            _ => eig3(&self.a),
        }
    }

    #[inline]
    pub fn max_eigenvalue(&self) -> f64 {
        match self.dim {
            2 => {
                let (a, b, d) = (self.a[0][0], self.a[0][1], self.a[1][1]);
                0.5 * (a + d) + (0.5 * (a - d)).hypot(b)
            }
            _ => self.eigenvalues()[0],
        }
    }

    /// Operator (spectral) norm.
    pub fn operator_norm(&self) -> f64 {
        let ev = self.eigenvalues();
        ev[0].abs().max(ev[self.dim - 1].abs())
    }

    /// Eigenpairs sorted by descending eigenvalue; eigenvalues from the
    /// closed form, orthonormal eigenvectors from `nalgebra`.
    pub fn eigen(&self) -> (Vector, Vec<Vector>) {
        let m = DMatrix::from_fn(self.dim, self.dim, |i, j| self.a[i][j]);
        let se = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&i, &j| se.eigenvalues[j].total_cmp(&se.eigenvalues[i]));
        let vecs = order
            .iter()
            .map(|&k| {
                let col = se.eigenvectors.column(k);
                Vector::from_slice(col.as_slice())
            })
            .collect();
        (self.eigenvalues(), vecs)
    }
}

fn eig3(a: &[[f64; MAX_DIM]; MAX_DIM]) -> Vector {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if p1 == 0.0 {
        let mut d = [a[0][0], a[1][1], a[2][2]];
        d.sort_by(|x, y| y.total_cmp(x));
        return Vector::from_slice(&d);
    }
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = |i: usize, j: usize| (a[i][j] - if i == j { q } else { 0.0 }) / p;
    let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
        - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    Vector::from_slice(&[e1, e2, e3])
}

impl Add for SymMatrix {
    type Output = SymMatrix;
    #[inline]
    fn add(mut self, rhs: SymMatrix) -> SymMatrix {
        self += rhs;
        self
    }
}

impl AddAssign for SymMatrix {
    #[inline]
    fn add_assign(&mut self, rhs: SymMatrix) {
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.a[i][j] += rhs.a[i][j];
            }
        }
    }
}

impl Sub for SymMatrix {
    type Output = SymMatrix;
    #[inline]
    fn sub(mut self, rhs: SymMatrix) -> SymMatrix {
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.a[i][j] -= rhs.a[i][j];
            }
        }
        self
    }
}

impl Mul<f64> for SymMatrix {
    type Output = SymMatrix;
    #[inline]
    fn mul(mut self, s: f64) -> SymMatrix {
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.a[i][j] *= s;
            }
        }
        self
    }
}

impl Neg for SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self * -1.0
    }
}

/// Determinant of a square matrix given row-major, via LU in `nalgebra`.
pub fn determinant(dim: usize, entries: &[f64]) -> f64 {
    DMatrix::from_row_slice(dim, dim, entries).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_2x2_diag_and_offdiag() {
        let m = SymMatrix::from_rows(&[&[2.0, 0.0], &[0.0, -1.0]]);
        assert_eq!(m.eigenvalues().as_slice(), &[2.0, -1.0]);
        let m = SymMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let ev = m.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-15 && (ev[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_3x3_match_nalgebra() {
        let m = SymMatrix::from_rows(&[&[1.0, 0.3, -0.2], &[0.3, -2.0, 0.7], &[-0.2, 0.7, 0.5]]);
        let ev = m.eigenvalues();
        let (_, vecs) = m.eigen();
        for (k, v) in vecs.iter().enumerate() {
            let r = m.mul_vec(v) - *v * ev[k];
            assert!(r.max_abs() < 1e-12, "{k}: {r:?}");
        }
        assert!((ev[0] + ev[1] + ev[2] - m.trace()).abs() < 1e-13);
    }

    #[test]
    fn trace_free_removes_trace() {
        let m = SymMatrix::from_rows(&[&[3.0, 1.0], &[1.0, 5.0]]).trace_free();
        assert!(m.trace().abs() < 1e-15);
        assert_eq!(m.get(0, 1), 1.0);
    }

    #[test]
    fn packed_round_trip() {
        let m = SymMatrix::from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 5.0], &[3.0, 5.0, 6.0]]);
        let mut p = [0.0; 6];
        m.to_packed(&mut p);
        assert_eq!(p, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(SymMatrix::from_packed(3, &p), m);
    }

    #[test]
    fn determinant_of_rank_deficient_matrix_vanishes() {
        let d = determinant(3, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(d, 0.0);
        assert!((determinant(2, &[1.0, 2.0, 3.0, 4.0]) + 2.0).abs() < 1e-14);
    }
}
