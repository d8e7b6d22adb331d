//! Pointwise geometry of the relaxed constraint set: the functional `e`,
//! hull membership, the wave cone, special directions, admissible segments
//! and decompositions of hull points into constraint-set points.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{determinant, SymMatrix, Vector};
use crate::tolerances::{ALGEBRAIC, GEOMETRIC, RECURSIVE};

/// A pointwise value `(m, U, q)` with `U` symmetric and trace-free.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateTriple {
    pub m: Vector,
    pub u: SymMatrix,
    pub q: f64,
}

impl StateTriple {
    pub fn new(m: Vector, u: SymMatrix, q: f64) -> Result<Self> {
        if m.dim() != u.dim() {
            return Err(Error::Precondition("m and U dimensions differ".into()));
        }
        if u.trace().abs() > ALGEBRAIC * (1.0 + u.max_abs()) {
            return Err(Error::Precondition(format!("trace(U) = {:e}", u.trace())));
        }
        Ok(StateTriple { m, u, q })
    }

    pub fn zeros(n: usize) -> Self {
        StateTriple {
            m: Vector::zeros(n),
            u: SymMatrix::zeros(n),
            q: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    /// Max-entry magnitude, used as a scale for tolerances.
    pub fn scale(&self) -> f64 {
        self.m.max_abs().max(self.u.max_abs()).max(self.q.abs())
    }

    pub fn distance(&self, other: &StateTriple) -> f64 {
        (self.m - other.m)
            .max_abs()
            .max((self.u - other.u).max_abs())
            .max((self.q - other.q).abs())
    }
}

impl Add for StateTriple {
    type Output = StateTriple;
    fn add(self, o: StateTriple) -> StateTriple {
        StateTriple {
            m: self.m + o.m,
            u: self.u + o.u,
            q: self.q + o.q,
        }
    }
}

impl Sub for StateTriple {
    type Output = StateTriple;
    fn sub(self, o: StateTriple) -> StateTriple {
        StateTriple {
            m: self.m - o.m,
            u: self.u - o.u,
            q: self.q - o.q,
        }
    }
}

impl Mul<f64> for StateTriple {
    type Output = StateTriple;
    fn mul(self, s: f64) -> StateTriple {
        StateTriple {
            m: self.m * s,
            u: self.u * s,
            q: self.q * s,
        }
    }
}

impl Neg for StateTriple {
    type Output = StateTriple;
    fn neg(self) -> StateTriple {
        self * -1.0
    }
}

/// Density, energy level and the pressure value `p(ρ)` fixing the `q`
/// slice of the constraint set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintParams {
    pub rho: f64,
    pub chi: f64,
    pub pressure: f64,
}

impl ConstraintParams {
    pub fn new(rho: f64, chi: f64) -> Result<Self> {
        if !(rho > 0.0) || !(chi > 0.0) || !rho.is_finite() || !chi.is_finite() {
            return Err(Error::Precondition(format!(
                "need rho > 0 and chi > 0 (got {rho}, {chi})"
            )));
        }
        Ok(ConstraintParams {
            rho,
            chi,
            pressure: 0.0,
        })
    }

    pub fn with_pressure(mut self, pressure: f64) -> Self {
        self.pressure = pressure;
        self
    }

    /// The sublevel `χ/n` of `e` bounding the hull.
    pub fn level(&self, n: usize) -> f64 {
        self.chi / n as f64
    }

    pub fn q_target(&self, n: usize) -> f64 {
        self.pressure + self.level(n)
    }

    /// `ρχ`, the squared momentum bound.
    pub fn momentum_bound(&self) -> f64 {
        self.rho * self.chi
    }

    /// The point of the constraint set with momentum `m` (`|m|² = ρχ`).
    pub fn constraint_point(&self, m: Vector) -> StateTriple {
        let n = m.dim();
        StateTriple {
            m,
            u: (SymMatrix::outer(&m) * (1.0 / self.rho)).trace_free(),
            q: self.q_target(n),
        }
    }
}

/// `S = m⊗m/ρ − U`.
#[inline]
pub fn stress_gap(rho: f64, m: &Vector, u: &SymMatrix) -> SymMatrix {
    SymMatrix::outer(m) * (1.0 / rho) - *u
}

/// `e(ρ, m, U) = λ_max(m⊗m/ρ − U)`.
pub fn e_value(rho: f64, m: &Vector, u: &SymMatrix) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::NonPositiveDensity { min: rho });
    }
    Ok(e_unchecked(rho, m, u))
}

#[inline]
pub(crate) fn e_unchecked(rho: f64, m: &Vector, u: &SymMatrix) -> f64 {
    stress_gap(rho, m, u).max_eigenvalue()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HullStatus {
    InsideHint,
    OnBoundary,
    Outside,
    WrongPressure,
}

pub fn in_hull(params: &ConstraintParams, z: &StateTriple) -> HullStatus {
    let n = z.dim();
    let level = params.level(n);
    if (z.q - params.q_target(n)).abs() > GEOMETRIC * (1.0 + params.q_target(n).abs()) {
        return HullStatus::WrongPressure;
    }
    let e = e_unchecked(params.rho, &z.m, &z.u);
    let tol = GEOMETRIC * level.max(1.0);
    if e < level - tol {
        HullStatus::InsideHint
    } else if e <= level + tol {
        HullStatus::OnBoundary
    } else {
        HullStatus::Outside
    }
}

/// Membership in the constraint set itself within `tol`.
pub fn in_constraint_set(params: &ConstraintParams, z: &StateTriple, tol: f64) -> bool {
    let n = z.dim();
    let scale = params.momentum_bound().max(1.0);
    if (z.m.norm_sq() - params.momentum_bound()).abs() > tol * scale {
        return false;
    }
    let target = params.constraint_point(z.m);
    (z.u - target.u).max_abs() <= tol * scale && (z.q - params.q_target(n)).abs() <= tol * scale
}

/// The symmetric `(n+1)×(n+1)` matrix `[[U + qI, m], [mᵀ, 0]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeMatrix(pub DMatrix<f64>);

impl SpaceTimeMatrix {
    pub fn from_state(z: &StateTriple) -> Self {
        let n = z.dim();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = z.u.get(i, j) + if i == j { z.q } else { 0.0 };
            }
            m[(i, n)] = z.m[i];
            m[(n, i)] = z.m[i];
        }
        SpaceTimeMatrix(m)
    }

    pub fn determinant(&self) -> f64 {
        let d = self.0.nrows();
        let entries: Vec<f64> = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| self.0[(i, j)])
            .collect();
        determinant(d, &entries)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.0.nrows();
        (0..d)
            .map(|i| (0..d).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }
}

pub fn in_wave_cone(z: &StateTriple) -> bool {
    let m = SpaceTimeMatrix::from_state(z);
    let scale = m.0.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 {
        return true;
    }
    m.determinant().abs() <= GEOMETRIC * scale.powi(z.dim() as i32 + 1)
}

/// `(c − d, (c⊗c − d⊗d)/ρ, 0)` for `|c| = |d|`, `c ≠ d`.
pub fn special_direction(c: &Vector, d: &Vector, rho: f64) -> Result<StateTriple> {
    if !(rho > 0.0) {
        return Err(Error::NonPositiveDensity { min: rho });
    }
    let scale = c.norm_sq().max(d.norm_sq()).max(1.0);
    if (c.norm_sq() - d.norm_sq()).abs() > ALGEBRAIC * scale {
        return Err(Error::Precondition(format!(
            "|c|² = {} differs from |d|² = {}",
            c.norm_sq(),
            d.norm_sq()
        )));
    }
    if (*c - *d).max_abs() <= ALGEBRAIC * scale.sqrt() {
        return Err(Error::Precondition("c = d".into()));
    }
    Ok(StateTriple {
        m: *c - *d,
        u: (SymMatrix::outer(c) - SymMatrix::outer(d)) * (1.0 / rho),
        q: 0.0,
    })
}

/// Space-time kernel vector `(ξ_x, ξ_t)` of the special direction built
/// from `(c, d)`: `(c + d, −(|c|² + c·d)/ρ)`, or a spatial vector
/// orthogonal to `c` when `c = −d`.
pub fn kernel_vector(c: &Vector, d: &Vector, rho: f64) -> (Vector, f64) {
    let s = *c + *d;
    if s.max_abs() > ALGEBRAIC * c.norm().max(1.0) {
        return (s, -(c.norm_sq() + c.dot(d)) / rho);
    }
    let n = c.dim();
    // any unit vector orthogonal to c, scaled like |c|
    let axis = (0..n)
        .min_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()))
        .unwrap_or(0);
    let e = Vector::unit(n, axis);
    let w = e - *c * (c.dot(&e) / c.norm_sq());
    (w * (c.norm() / w.norm()), 0.0)
}

/// Largest `t ≥ 0` with `e(z + t·dir) ≤ level`, by doubling and bisection.
/// Requires `e(z) ≤ level`.
pub fn max_step(params: &ConstraintParams, z: &StateTriple, dir: &StateTriple) -> f64 {
    let level = params.level(z.dim());
    let f = |t: f64| e_unchecked(params.rho, &(z.m + dir.m * t), &(z.u + dir.u * t)) - level;
    let mut hi = 1.0;
    let mut guard = 0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    lo
}

/// A segment `[center − direction, center + direction]` with generators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissibleSegment {
    pub center: StateTriple,
    pub direction: StateTriple,
    pub generators: (Vector, Vector),
}

impl AdmissibleSegment {
    pub fn endpoints(&self) -> (StateTriple, StateTriple) {
        (
            self.center - self.direction,
            self.center + self.direction,
        )
    }

    /// `|m̄| √(ρχ) / (ρχ − |m|²)`, the ratio entering the length bound.
    pub fn length_ratio(&self, params: &ConstraintParams) -> f64 {
        let gap = params.momentum_bound() - self.center.m.norm_sq();
        self.direction.m.norm() * params.momentum_bound().sqrt() / gap
    }
}

/// Knobs of the randomized segment search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSearch {
    pub random_pairs: usize,
    /// Fraction of the maximal half-length actually used.
    pub shrink: f64,
}

impl Default for SegmentSearch {
    fn default() -> Self {
        SegmentSearch {
            random_pairs: 48,
            shrink: 0.9,
        }
    }
}

fn random_unit(n: usize, rng: &mut impl Rng) -> Vector {
    loop {
        let mut v = Vector::zeros(n);
        for a in 0..n {
            v[a] = rng.gen_range(-1.0..1.0);
        }
        let r = v.norm();
        if r > 1e-3 && r <= 1.0 {
            return v * (1.0 / r);
        }
    }
}

fn orthonormal_complement(v: &Vector) -> Vec<Vector> {
    let n = v.dim();
    let mut basis = vec![*v];
    for a in 0..n {
        let mut w = Vector::unit(n, a);
        for b in &basis {
            w = w - *b * b.dot(&w);
        }
        if w.norm() > 1e-8 {
            basis.push(w * (1.0 / w.norm()));
        }
    }
    basis.into_iter().skip(1).take(n - 1).collect()
}

/// Generator pairs tried by the search: random pairs on the sphere plus
/// pairs symmetric about the top eigenvector of `m⊗m/ρ − U` and about `m`.
pub fn candidate_generators(
    params: &ConstraintParams,
    z: &StateTriple,
    random_pairs: usize,
    rng: &mut impl Rng,
) -> Vec<(Vector, Vector)> {
    let n = z.dim();
    let radius = params.momentum_bound().sqrt();
    let mut out = Vec::with_capacity(random_pairs + 16);
    let (_, vecs) = stress_gap(params.rho, &z.m, &z.u).eigen();
    let mut axes = vec![vecs[0]];
    if z.m.norm() > 1e-12 {
        axes.push(z.m * (1.0 / z.m.norm()));
    }
    for v in axes {
        for w in orthonormal_complement(&v) {
            for &frac in &[0.0, 0.25, 0.5, 0.75] {
                let alpha = radius * (frac * std::f64::consts::FRAC_PI_2).sin();
                let beta = (radius * radius - alpha * alpha).max(0.0).sqrt();
                out.push((v * alpha + w * beta, v * alpha - w * beta));
            }
        }
    }
    for _ in 0..random_pairs {
        out.push((random_unit(n, rng), random_unit(n, rng)));
    }
    let onto_sphere = |v: Vector| v * (radius / v.norm());
    out.into_iter()
        .filter(|(c, d)| c.norm() > 0.0 && d.norm() > 0.0)
        .map(|(c, d)| (onto_sphere(c), onto_sphere(d)))
        .collect()
}

fn generators_ok(c: &Vector, d: &Vector, radius: f64) -> bool {
    let tol = 1e-6 * radius;
    (*c - *d).norm() > tol && (*c + *d).norm() > tol
}

/// Half-length (along the unit-parameter special direction) of the longest
/// symmetric segment about `z` staying in the closed hull.
pub fn symmetric_extent(params: &ConstraintParams, z: &StateTriple, dir: &StateTriple) -> f64 {
    max_step(params, z, dir).min(max_step(params, z, &-*dir))
}

/// Best admissible segment centred at `z` among the candidate generators.
pub fn admissible_segment(
    params: &ConstraintParams,
    z: &StateTriple,
    search: &SegmentSearch,
    rng: &mut impl Rng,
) -> Result<AdmissibleSegment> {
    let n = z.dim();
    if in_hull(params, z) != HullStatus::InsideHint {
        return Err(Error::NotInHyperinterior {
            e: e_unchecked(params.rho, &z.m, &z.u),
            level: params.level(n),
        });
    }
    let radius = params.momentum_bound().sqrt();
    let mut best: Option<(f64, AdmissibleSegment)> = None;
    for (c, d) in candidate_generators(params, z, search.random_pairs, rng) {
        if !generators_ok(&c, &d, radius) {
            continue;
        }
        let dir = special_direction(&c, &d, params.rho)?;
        let t = symmetric_extent(params, z, &dir) * search.shrink;
        let gain = t * dir.m.norm();
        if best.as_ref().is_none_or(|(g, _)| gain > *g) {
            best = Some((
                gain,
                AdmissibleSegment {
                    center: *z,
                    direction: dir * t,
                    generators: (c, d),
                },
            ));
        }
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| Error::Precondition("no valid generator pair".into()))
}

/// `z` written as a convex combination of constraint-set points.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub leaves: Vec<(f64, StateTriple)>,
    /// Split directions in construction order; each lies in the wave cone.
    pub directions: Vec<StateTriple>,
    pub depth: usize,
}

impl Decomposition {
    pub fn recombine(&self) -> StateTriple {
        let n = self.leaves[0].1.dim();
        self.leaves
            .iter()
            .fold(StateTriple::zeros(n), |acc, (w, z)| acc + *z * *w)
    }
}

/// Split along the eigenspace of `S` at the level: a tangent special
/// direction that keeps that eigenspace fixed.
fn tangent_direction(params: &ConstraintParams, z: &StateTriple) -> Option<(StateTriple, Vec<Vector>)> {
    let n = z.dim();
    let level = params.level(n);
    let (vals, vecs) = stress_gap(params.rho, &z.m, &z.u).eigen();
    let tol = 1e-8 * level.max(1.0);
    let top: Vec<Vector> = (0..n)
        .filter(|&i| (vals[i] - level).abs() <= tol)
        .map(|i| vecs[i])
        .collect();
    let rest: Vec<usize> = (0..n).filter(|&i| (vals[i] - level).abs() > tol).collect();
    if top.is_empty() || rest.is_empty() {
        return None;
    }
    let m_top = top.iter().fold(Vector::zeros(n), |acc, v| acc + *v * v.dot(&z.m));
    let gap = params.momentum_bound() - m_top.norm_sq();
    if gap <= 0.0 {
        return None;
    }
    let w = vecs[rest[0]] * gap.sqrt();
    let c = m_top + w;
    let d = m_top - w;
    let dir = StateTriple {
        m: c - d,
        u: (SymMatrix::outer(&c) - SymMatrix::outer(&d)) * (1.0 / params.rho),
        q: 0.0,
    };
    Some((dir, top))
}

/// Largest `t` such that the eigenvalues of `S(z + t·dir)` off the fixed
/// eigenspace stay at or below the level.
fn tangent_step(params: &ConstraintParams, z: &StateTriple, dir: &StateTriple, fixed: &[Vector]) -> f64 {
    let n = z.dim();
    let level = params.level(n);
    let mut proj = SymMatrix::zeros(n);
    for v in fixed {
        proj = proj + SymMatrix::outer(v);
    }
    let f = |t: f64| {
        let s = stress_gap(params.rho, &(z.m + dir.m * t), &(z.u + dir.u * t));
        let shift = s.operator_norm() + level.abs() + 1.0;
        (s - proj * shift).max_eigenvalue() - level
    };
    let mut hi = 1.0;
    while f(hi) <= 0.0 && hi < 1e12 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn split(
    params: &ConstraintParams,
    z: &StateTriple,
    dir: &StateTriple,
    t_plus: f64,
    t_minus: f64,
) -> [(f64, StateTriple); 2] {
    let total = t_plus + t_minus;
    [
        (t_minus / total, *z + *dir * t_plus),
        (t_plus / total, *z - *dir * t_minus),
    ]
    .map(|(w, p)| {
        let mut p = p;
        p.q = params.q_target(z.dim());
        (w, p)
    })
}

const MAX_DEPTH: usize = 8;

fn decompose_boundary(
    params: &ConstraintParams,
    weight: f64,
    z: StateTriple,
    depth: usize,
    out: &mut Decomposition,
) -> Result<()> {
    out.depth = out.depth.max(depth);
    if in_constraint_set(params, &z, RECURSIVE) {
        out.leaves.push((weight, z));
        return Ok(());
    }
    if depth >= MAX_DEPTH {
        return Err(Error::DecompositionDiverged { depth });
    }
    let Some((dir, fixed)) = tangent_direction(params, &z) else {
        return Err(Error::DecompositionDiverged { depth });
    };
    let tp = tangent_step(params, &z, &dir, &fixed);
    let tm = tangent_step(params, &z, &-dir, &fixed);
    out.directions.push(dir);
    for (w, p) in split(params, &z, &dir, tp, tm) {
        decompose_boundary(params, weight * w, p, depth + 1, out)?;
    }
    Ok(())
}

/// Decompose `z` starting with a split along `direction`.
pub fn decompose_along(
    params: &ConstraintParams,
    z: &StateTriple,
    direction: &StateTriple,
) -> Result<Decomposition> {
    check_decomposable(params, z)?;
    let mut out = Decomposition {
        leaves: Vec::new(),
        directions: Vec::new(),
        depth: 0,
    };
    if in_constraint_set(params, z, RECURSIVE) {
        out.leaves.push((1.0, *z));
        return Ok(out);
    }
    let tp = max_step(params, z, direction);
    let tm = max_step(params, z, &-*direction);
    if !tp.is_finite() || !tm.is_finite() {
        return Err(Error::Precondition("direction does not leave the hull".into()));
    }
    out.directions.push(*direction);
    out.depth = 1;
    for (w, p) in split(params, z, direction, tp, tm) {
        decompose_boundary(params, w, p, 1, &mut out)?;
    }
    Ok(out)
}

fn check_decomposable(params: &ConstraintParams, z: &StateTriple) -> Result<()> {
    match in_hull(params, z) {
        HullStatus::Outside => Err(Error::Precondition("point outside the hull".into())),
        HullStatus::WrongPressure => Err(Error::Precondition("q off the pressure slice".into())),
        _ => Ok(()),
    }
}

/// Decompose a hull point into constraint-set points, the first split
/// following the best admissible segment and later splits tangent to the
/// saturated eigenspace. Depth is at most `n`.
pub fn hull_decompose(
    params: &ConstraintParams,
    z: &StateTriple,
    rng: &mut impl Rng,
) -> Result<Decomposition> {
    check_decomposable(params, z)?;
    match in_hull(params, z) {
        HullStatus::InsideHint => {
            let seg = admissible_segment(params, z, &SegmentSearch::default(), rng)?;
            decompose_along(params, z, &seg.direction)
        }
        _ => {
            let mut out = Decomposition {
                leaves: Vec::new(),
                directions: Vec::new(),
                depth: 0,
            };
            decompose_boundary(params, 1.0, *z, 0, &mut out)?;
            Ok(out)
        }
    }
}
