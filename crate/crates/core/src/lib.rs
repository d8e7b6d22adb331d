//! Numerical convex integration for the semi-stationary isentropic Euler
//! system on the periodic torus `[0,1]^n`.
//!
//! The crate builds strict subsolutions from a density `rho0`, pushes them
//! towards the constraint set `K_{rho,chi}` with localized high-frequency
//! waves along wave-cone directions, and certifies every invariant that can
//! be checked on a grid: spectral divergence, weak momentum residuals,
//! hyperinterior membership and the energy (admissibility) inequality.
//!
//! Module map:
//! - [`torus`]: periodic grid fields, spectral calculus, weak pairings, dumps.
//! - [`geometry`]: the functional `e`, hulls, the wave cone, admissible segments.
//! - [`subsolution`]: the stationary subsolution and subsolution states.
//! - [`oscillation`]: the third-order potential, localized waves, improvement steps.
//! - [`admissibility`]: pressure laws, constants, the chi ODE and energy residuals.
//! - [`pipeline`]: configuration, the batch run, reports and dump validation.

pub mod admissibility;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod oscillation;
pub mod pipeline;
pub mod subsolution;
pub mod tolerances;
pub mod torus;

pub use error::{Error, Result};
