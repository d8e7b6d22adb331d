use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("density must be positive (min {min})")]
    NonPositiveDensity { min: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("point is not in the hyperinterior (e = {e}, chi/n = {level})")]
    NotInHyperinterior { e: f64, level: f64 },
    #[error("hull decomposition did not converge within depth {depth}")]
    DecompositionDiverged { depth: usize },
    #[error("potential operator construction failed (constraint residual {residual:e})")]
    PotentialInfeasible { residual: f64 },
    #[error("cover condition unattainable at radius {radius}: covered {covered:e} < required {required:e}")]
    CoverUnattainable { radius: f64, covered: f64, required: f64 },
    #[error("no admissible frequency below the Nyquist cap {cap} (ball {ball})")]
    NoAdmissibleFrequency { cap: u32, ball: usize },
    #[error("invariant `{name}` violated: {value:e} (tolerance {tol:e})")]
    InvariantViolated { name: String, value: f64, tol: f64 },
    #[error("seam mismatch {0:e} in time-symmetric data")]
    SeamMismatch(f64),
    #[error("malformed dump {path}: {reason}")]
    MalformedDump { path: PathBuf, reason: String },
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invariant(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Error::InvariantViolated {
            name: name.into(),
            value,
            tol,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
