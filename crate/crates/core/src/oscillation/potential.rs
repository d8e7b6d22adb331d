//! Constant-coefficient third-order operators `A(∂)` mapping scalar
//! potentials to symmetric space-time matrices `[[U, m], [mᵀ, 0]]` that
//! solve the linearized system with zero pressure.
//!
//! The symbol `P(ξ)` is a matrix of cubic forms. It is found by linear
//! least squares from four requirements: `Σ_b ξ_b P_ab(ξ) ≡ 0`, zero corner,
//! trace-free spatial block and `P(η) = M̄`, where `M̄` is the space-time
//! matrix of a special direction and `η` spans its kernel.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{kernel_vector, special_direction, SpaceTimeMatrix, StateTriple};
use crate::linalg::Vector;
use crate::tolerances::POTENTIAL;

/// Sorted index triples `a ≤ b ≤ c` over `dim` variables.
pub fn cubic_monomials(dim: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..dim {
        for b in a..dim {
            for c in b..dim {
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn quartic_monomials(dim: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..dim {
        for b in a..dim {
            for c in b..dim {
                for d in c..dim {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}

/// Upper-triangle entries `(a, b)` of a space-time matrix, corner excluded.
pub fn free_entries(dim: usize) -> Vec<(usize, usize)> {
    (0..dim)
        .flat_map(|a| (a..dim).map(move |b| (a, b)))
        .filter(|&(a, b)| !(a == dim - 1 && b == dim - 1))
        .collect()
}

/// `A(∂)` together with the plane-wave data it reproduces.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    n: usize,
    eta: Vec<f64>,
    mbar: Vec<f64>,
    generators: (Vector, Vector),
    rho: f64,
    monomials: Vec<[usize; 3]>,
    entries: Vec<(usize, usize)>,
    /// `coeffs[e * monomials.len() + α]`.
    coeffs: Vec<f64>,
}

impl OperatorSpec {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Space-time dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// Wave covector, spatial part of unit length.
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// `M̄ = M_c − M_d`, row-major `(n+1)²`.
    pub fn mbar(&self) -> &[f64] {
        &self.mbar
    }

    pub fn generators(&self) -> (Vector, Vector) {
        self.generators
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn monomials(&self) -> &[[usize; 3]] {
        &self.monomials
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    /// Coefficient of `∂^α` in entry `(a, b)`.
    pub fn coefficient(&self, a: usize, b: usize, alpha: usize) -> f64 {
        let (a, b) = (a.min(b), a.max(b));
        self.entries
            .iter()
            .position(|&e| e == (a, b))
            .map_or(0.0, |e| self.coeffs[e * self.monomials.len() + alpha])
    }

    pub fn entry_coefficients(&self, e: usize) -> &[f64] {
        let nm = self.monomials.len();
        &self.coeffs[e * nm..(e + 1) * nm]
    }

    pub fn scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Full symmetric output given `∂^α φ` for each monomial.
    pub fn apply(&self, derivs: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        for (e, &(a, b)) in self.entries.iter().enumerate() {
            let v: f64 = self
                .entry_coefficients(e)
                .iter()
                .zip(derivs)
                .map(|(c, x)| c * x)
                .sum();
            out[a * d + b] = v;
            out[b * d + a] = v;
        }
        out
    }

    /// `P(ξ)`, the symbol evaluated at a covector.
    pub fn symbol(&self, xi: &[f64]) -> Vec<f64> {
        let derivs: Vec<f64> = self
            .monomials
            .iter()
            .map(|m| xi[m[0]] * xi[m[1]] * xi[m[2]])
            .collect();
        self.apply(&derivs)
    }

    /// Split a full space-time matrix into `(m, U, q = 0)`.
    pub fn to_state(&self, full: &[f64]) -> StateTriple {
        let (n, d) = (self.n, self.dim());
        let mut z = StateTriple::zeros(n);
        for i in 0..n {
            z.m[i] = full[i * d + n];
            for j in i..n {
                z.u.set(i, j, full[i * d + j]);
            }
        }
        z
    }
}

/// Build `A(∂)` for the special direction generated by `(c, d)` at density
/// `rho`.
pub fn potential_operator(c: &Vector, d: &Vector, rho: f64) -> Result<OperatorSpec> {
    let dir = special_direction(c, d, rho)?;
    let n = c.dim();
    let dim = n + 1;
    let (ex, et) = kernel_vector(c, d, rho);
    let norm = ex.norm();
    let mut eta: Vec<f64> = ex.as_slice().iter().map(|v| v / norm).collect();
    eta.push(et / norm);

    let st = SpaceTimeMatrix::from_state(&dir);
    let mbar: Vec<f64> = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .map(|(i, j)| st.0[(i, j)])
        .collect();

    let monomials = cubic_monomials(dim);
    let quartics = quartic_monomials(dim);
    let entries = free_entries(dim);
    let nm = monomials.len();
    let unknowns = entries.len() * nm;
    let rows = dim * quartics.len() + nm + entries.len();
    let mut a = DMatrix::<f64>::zeros(rows, unknowns);
    let mut rhs = DVector::<f64>::zeros(rows);
    let entry_index = |p: usize, q: usize| {
        let key = (p.min(q), p.max(q));
        entries.iter().position(|&e| e == key)
    };

    // Σ_b ξ_b P_ab(ξ) ≡ 0, one row per (a, quartic monomial)
    for row_a in 0..dim {
        for b in 0..dim {
            let Some(e) = entry_index(row_a, b) else {
                continue;
            };
            for (alpha, m) in monomials.iter().enumerate() {
                let mut q = [m[0], m[1], m[2], b];
                q.sort_unstable();
                let beta = quartics.binary_search(&q).expect("sorted quartic");
                a[(row_a * quartics.len() + beta, e * nm + alpha)] += 1.0;
            }
        }
    }
    let mut row = dim * quartics.len();
    // tr U ≡ 0
    for alpha in 0..nm {
        for i in 0..n {
            let e = entry_index(i, i).expect("diagonal entry");
            a[(row, e * nm + alpha)] = 1.0;
        }
        row += 1;
    }
    // P(η) = M̄
    for (e, &(p, q)) in entries.iter().enumerate() {
        for (alpha, m) in monomials.iter().enumerate() {
            a[(row, e * nm + alpha)] = eta[m[0]] * eta[m[1]] * eta[m[2]];
        }
        rhs[row] = mbar[p * dim + q];
        row += 1;
    }

    // regularized normal equations with iterative refinement
    let mut gram = a.tr_mul(&a);
    let shift = 1e-13 * gram.diagonal().max();
    for i in 0..unknowns {
        gram[(i, i)] += shift;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Precondition("normal equations are not positive definite".into()))?;
    let mut x = DVector::<f64>::zeros(unknowns);
    for _ in 0..4 {
        let r = &rhs - &a * &x;
        x += chol.solve(&a.tr_mul(&r));
    }
    let residual = (&a * &x - &rhs).amax();
    let scale = 1.0 + rhs.amax();
    if !(residual <= POTENTIAL * scale) {
        return Err(Error::PotentialInfeasible { residual });
    }
    Ok(OperatorSpec {
        n,
        eta,
        mbar,
        generators: (*c, *d),
        rho,
        monomials,
        entries,
        coeffs: x.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(n: usize) -> (Vector, Vector) {
        if n == 2 {
            (Vector::from_slice(&[1.0, 0.2]), Vector::from_slice(&[-0.2, 1.0]))
        } else {
            let c = Vector::from_slice(&[1.0, 0.5, -0.3]);
            let d = Vector::from_slice(&[0.3, -1.0, 0.5]);
            (c, d)
        }
    }

    #[test]
    fn system_sizes() {
        assert_eq!(cubic_monomials(3).len(), 10);
        assert_eq!(quartic_monomials(3).len(), 15);
        assert_eq!(free_entries(3).len(), 5);
        assert_eq!(cubic_monomials(4).len(), 20);
        assert_eq!(free_entries(4).len(), 9);
    }

    #[test]
    fn symbol_reproduces_plane_wave_and_kills_eta() {
        for n in [2, 3] {
            let (c, d) = pair(n);
            let op = potential_operator(&c, &d, 1.7).unwrap();
            let p = op.symbol(op.eta());
            for (x, y) in p.iter().zip(op.mbar()) {
                assert!((x - y).abs() < 1e-10);
            }
            // M̄ η = 0
            let dim = op.dim();
            for i in 0..dim {
                let v: f64 = (0..dim).map(|j| op.mbar()[i * dim + j] * op.eta()[j]).sum();
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symbol_is_divergence_free_trace_free_and_cornerless() {
        for n in [2, 3] {
            let (c, d) = pair(n);
            let op = potential_operator(&c, &d, 0.8).unwrap();
            let dim = op.dim();
            for xi in [[0.3, -1.2, 0.7, 0.4], [1.0, 2.0, -0.5, 0.1]] {
                let p = op.symbol(&xi[..dim]);
                for a in 0..dim {
                    let div: f64 = (0..dim).map(|b| xi[b] * p[a * dim + b]).sum();
                    assert!(div.abs() < 1e-10 * op.scale());
                }
                assert_eq!(p[dim * dim - 1], 0.0);
                let tr: f64 = (0..n).map(|i| p[i * dim + i]).sum();
                assert!(tr.abs() < 1e-10 * op.scale());
            }
        }
    }

    #[test]
    fn antipodal_generators_use_orthogonal_eta() {
        let c = Vector::from_slice(&[0.6, 0.8]);
        let op = potential_operator(&c, &-c, 1.0).unwrap();
        assert!(op.eta()[2].abs() < 1e-15);
        assert!((op.eta()[0] * 0.6 + op.eta()[1] * 0.8).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_generators() {
        let c = Vector::from_slice(&[1.0, 0.0]);
        assert!(potential_operator(&c, &c, 1.0).is_err());
        assert!(potential_operator(&c, &Vector::from_slice(&[0.0, 2.0]), 1.0).is_err());
        assert!(potential_operator(&c, &Vector::from_slice(&[0.0, 1.0]), 0.0).is_err());
    }
}
