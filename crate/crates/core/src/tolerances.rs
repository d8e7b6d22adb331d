//! Tolerance ladder shared by checks, tests and reports.
//!
//! Algebraic identities are held to round-off, geometric membership a little
//! looser, and recursive constructions looser still since error compounds
//! with depth.

/// Algebraic identities (trace, symmetry, convexity and bound inequalities).
pub const ALGEBRAIC: f64 = 1e-12;

/// Geometric membership tests (pressure hyperplane, wave-cone determinant).
pub const GEOMETRIC: f64 = 1e-10;

/// Recursive hull decompositions (weights, recombination, leaf distance).
pub const RECURSIVE: f64 = 1e-6;

/// Transform round trips.
pub const ROUND_TRIP: f64 = 1e-12;

/// Spectral divergence of momentum fields and stationary residuals.
pub const DIVERGENCE: f64 = 1e-8;

/// Quadrature tolerance for weak-form checks of exact steady solutions.
pub const WEAK_QUADRATURE: f64 = 1e-8;

/// Weak momentum residual of subsolution states against the test basis.
pub const WEAK_MOMENTUM: f64 = 1e-6;

/// Energy-inequality residual over nonnegative tests.
pub const ENERGY: f64 = 1e-6;

/// Relative agreement between the closed-form and RK4 chi profiles.
pub const CHI_CROSS: f64 = 1e-8;

/// Potential-operator structural identities (relative).
pub const POTENTIAL: f64 = 1e-10;

/// Replay of residual tables from dumps.
pub const REPLAY: f64 = 1e-12;
