//! Plateau cutoffs: identically one on the inner half-ball, zero outside
//! the unit ball, joined by a polynomial smoothstep of chosen regularity.
//! Derivatives through order three are closed-form.

use serde::{Deserialize, Serialize};

pub const MAX_DIM: usize = 4;

/// Value and derivatives of a cutoff in real coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffJet {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [[f64; MAX_DIM]; MAX_DIM],
    pub third: [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM],
}

impl CutoffJet {
    fn constant(value: f64) -> Self {
        CutoffJet {
            value,
            grad: [0.0; MAX_DIM],
            hess: [[0.0; MAX_DIM]; MAX_DIM],
            third: [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM],
        }
    }

    /// `∂_S f` for a multiset `S` of at most three axes.
    pub fn partial(&self, axes: &[usize]) -> f64 {
        match axes {
            [] => self.value,
            [a] => self.grad[*a],
            [a, b] => self.hess[*a][*b],
            [a, b, c] => self.third[*a][*b][*c],
            _ => unreachable!("order above three"),
        }
    }
}

/// Radial profile `f(ρ) = 1 − S(2ρ − 1)` on `(1/2, 1)`, where `S` is the
/// `C^p` smoothstep of degree `2p + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "CutoffRepr", into = "CutoffRepr")]
pub struct Cutoff {
    smoothness: u32,
    /// Coefficients of `S, S', S'', S'''` in increasing powers.
    poly: [Vec<f64>; 4],
}

#[derive(Serialize, Deserialize)]
struct CutoffRepr {
    smoothness: u32,
}

impl From<CutoffRepr> for Cutoff {
    fn from(r: CutoffRepr) -> Self {
        Cutoff::new(r.smoothness)
    }
}

impl From<Cutoff> for CutoffRepr {
    fn from(c: Cutoff) -> Self {
        CutoffRepr {
            smoothness: c.smoothness,
        }
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn differentiate(p: &[f64]) -> Vec<f64> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * i as f64)
        .collect()
}

fn horner(p: &[f64], u: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

impl Cutoff {
    /// `smoothness ≥ 3` keeps third derivatives continuous.
    pub fn new(smoothness: u32) -> Self {
        let p = smoothness as u64;
        let mut s = vec![0.0; (2 * p + 2) as usize];
        for j in 0..=p {
            let c = binomial(p + j, j) * binomial(2 * p + 1, p - j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            s[(p + 1 + j) as usize] = sign * c;
        }
        let s1 = differentiate(&s);
        let s2 = differentiate(&s1);
        let s3 = differentiate(&s2);
        Cutoff {
            smoothness,
            poly: [s, s1, s2, s3],
        }
    }

    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    /// `(f, f', f'', f''')` at radius `rho`.
    pub fn profile(&self, rho: f64) -> [f64; 4] {
        if rho <= 0.5 {
            return [1.0, 0.0, 0.0, 0.0];
        }
        if rho >= 1.0 {
            return [0.0; 4];
        }
        let u = 2.0 * rho - 1.0;
        [
            1.0 - horner(&self.poly[0], u),
            -2.0 * horner(&self.poly[1], u),
            -4.0 * horner(&self.poly[2], u),
            -8.0 * horner(&self.poly[3], u),
        ]
    }

    /// Jet of `y ↦ f(|w/s|)` for displacement `w` and per-axis scales `s`.
    pub fn jet(&self, w: &[f64], scales: &[f64]) -> CutoffJet {
        let d = w.len();
        let mut u = [0.0; MAX_DIM];
        for a in 0..d {
            u[a] = w[a] / scales[a];
        }
        let rho = u[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        if rho <= 0.5 {
            return CutoffJet::constant(1.0);
        }
        if rho >= 1.0 {
            return CutoffJet::constant(0.0);
        }
        let [f, f1, f2, f3] = self.profile(rho);
        for v in &mut u[..d] {
            *v /= rho;
        }
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mixed = f2 / rho - f1 / (rho * rho);
        let mut jet = CutoffJet::constant(f);
        for a in 0..d {
            jet.grad[a] = f1 * u[a] / scales[a];
            for b in 0..d {
                jet.hess[a][b] = (f2 * u[a] * u[b] + f1 / rho * (delta(a, b) - u[a] * u[b]))
                    / (scales[a] * scales[b]);
                for c in 0..d {
                    let sym = delta(a, b) * u[c] + delta(a, c) * u[b] + delta(b, c) * u[a]
                        - 3.0 * u[a] * u[b] * u[c];
                    jet.third[a][b][c] = (f3 * u[a] * u[b] * u[c] + mixed * sym)
                        / (scales[a] * scales[b] * scales[c]);
                }
            }
        }
        jet
    }
}
