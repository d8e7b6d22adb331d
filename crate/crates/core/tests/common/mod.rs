//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

use convint::geometry::{ConstraintParams, StateTriple};
use convint::linalg::{SymMatrix, Vector};
use nalgebra::DMatrix;
use rand::Rng;

/// Dense multivariate polynomial with exact differentiation.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Poly { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Poly::zero(dim);
        p.push(vec![0; dim], c);
        p
    }

    /// `Σ_a coeffs[a] y_a`.
    pub fn linear(coeffs: &[f64]) -> Self {
        let dim = coeffs.len();
        let mut p = Poly::zero(dim);
        for (a, &c) in coeffs.iter().enumerate() {
            let mut e = vec![0; dim];
            e[a] = 1;
            p.push(e, c);
        }
        p
    }

    /// Random coefficients in `[-1, 1]` on every monomial of degree `≤ degree`.
    pub fn random(dim: usize, degree: u32, rng: &mut impl Rng) -> Self {
        let mut p = Poly::zero(dim);
        let mut exps = vec![vec![]];
        for _ in 0..dim {
            exps = exps
                .into_iter()
                .flat_map(|e: Vec<u32>| {
                    (0..=degree).map(move |k| {
                        let mut e = e.clone();
                        e.push(k);
                        e
                    })
                })
                .filter(|e| e.iter().sum::<u32>() <= degree)
                .collect();
        }
        for e in exps {
            p.push(e, rng.gen_range(-1.0..1.0));
        }
        p
    }

    fn push(&mut self, exp: Vec<u32>, c: f64) {
        if c != 0.0 {
            *self.terms.entry(exp).or_insert(0.0) += c;
        }
    }

    pub fn derivative(&self, axis: usize) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (e, &c) in &self.terms {
            if e[axis] > 0 {
                let mut d = e.clone();
                d[axis] -= 1;
                out.push(d, c * e[axis] as f64);
            }
        }
        out
    }

    pub fn partial(&self, axes: &[usize]) -> Poly {
        axes.iter().fold(self.clone(), |p, &a| p.derivative(a))
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(y).map(|(&k, &x)| x.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn scale(mut self, s: f64) -> Poly {
        self.terms.values_mut().for_each(|c| *c *= s);
        self
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, &c) in &rhs.terms {
            out.push(e.clone(), c);
        }
        out
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &rhs.terms {
                out.push(ea.iter().zip(eb).map(|(a, b)| a + b).collect(), ca * cb);
            }
        }
        out
    }
}

/// `ψ(L)` for a univariate `ψ = Σ coeffs[j] s^j` and a polynomial `L`.
pub fn compose(coeffs: &[f64], inner: &Poly) -> Poly {
    coeffs.iter().rev().fold(Poly::zero(inner.dim), |acc, &c| {
        &(&acc * inner) + &Poly::constant(inner.dim, c)
    })
}

/// Third derivative of `Σ coeffs[j] s^j` at `s`.
pub fn third_derivative(coeffs: &[f64], s: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(3)
        .map(|(j, c)| c * (j * (j - 1) * (j - 2)) as f64 * s.powi(j as i32 - 3))
        .sum()
}

pub fn random_unit(n: usize, rng: &mut impl Rng) -> Vector {
    loop {
        let v = Vector::from_slice(&(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        let r = v.norm();
        if r > 1e-3 && r <= 1.0 {
            return v * (1.0 / r);
        }
    }
}

/// Random trace-free symmetric matrix with entries in `[-s, s]`.
pub fn random_trace_free(n: usize, s: f64, rng: &mut impl Rng) -> SymMatrix {
    let packed: Vec<f64> = (0..SymMatrix::packed_len(n)).map(|_| rng.gen_range(-s..s)).collect();
    SymMatrix::from_packed(n, &packed).trace_free()
}

/// Convex combination of constraint-set points pulled towards the
/// centre of the hull: a point of the hyperinterior.
pub fn random_interior(p: &ConstraintParams, n: usize, rng: &mut impl Rng) -> StateTriple {
    let r = p.momentum_bound().sqrt();
    let mut ws: Vec<f64> = (0..n + 2).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = ws.iter().sum();
    ws.iter_mut().for_each(|w| *w /= total);
    let z = ws
        .into_iter()
        .fold(StateTriple::zeros(n), |acc, w| acc + p.constraint_point(random_unit(n, rng) * r) * w);
    let centre = StateTriple {
        m: Vector::zeros(n),
        u: SymMatrix::zeros(n),
        q: p.q_target(n),
    };
    centre + (z - centre) * rng.gen_range(0.3..0.99)
}

pub fn dense(s: &SymMatrix) -> DMatrix<f64> {
    let n = s.dim();
    DMatrix::from_fn(n, n, |i, j| s.get(i, j))
}

/// `λ_max(m⊗m/ρ − U)` through a dense symmetric eigensolver.
pub fn lambda_max(rho: f64, m: &Vector, u: &SymMatrix) -> f64 {
    let n = m.dim();
    let s = DMatrix::from_fn(n, n, |i, j| m[i] * m[j] / rho - u.get(i, j));
    s.symmetric_eigen().eigenvalues.max()
}

/// The `(n+1)×(n+1)` block matrix `[[U + qI, m], [mᵀ, 0]]`.
pub fn block_matrix(z: &StateTriple) -> DMatrix<f64> {
    let n = z.m.dim();
    DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) => z.u.get(i, j) + if i == j { z.q } else { 0.0 },
        (true, false) => z.m[i],
        (false, true) => z.m[j],
        (false, false) => 0.0,
    })
}

/// Space-time `L²` distance between two families sampled on the same
/// grid and times, trapezoid rule in time.
pub fn l2_distance(a: &convint::torus::FieldFamily, b: &convint::torus::FieldFamily) -> f64 {
    let cell = a.grid().spacing().powi(a.grid().n as i32);
    let w = convint::torus::trapezoid_weights(&a.times);
    a.slices
        .iter()
        .zip(&b.slices)
        .zip(&w)
        .map(|((x, y), w)| {
            w * cell
                * x.data()
                    .iter()
                    .zip(y.data())
                    .map(|(p, q)| (p - q).powi(2))
                    .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}
