//! Localized high-frequency waves along wave-cone directions and the
//! improvement steps built from them.

pub mod cover;
pub mod cutoff;
pub mod improve;
pub mod potential;
pub mod wave;

pub use cover::{ball_cover, target_gap_square, Ball, Cover, CoverOptions, Target};
pub use cutoff::{Cutoff, CutoffJet};
pub use improve::{
    improvement_step, iterate, iterate_with, BallReport, GainReport, ImprovementOptions,
    STEPS_CSV_HEADER, STEPS_CSV_VERSION,
};
pub use potential::{cubic_monomials, free_entries, potential_operator, OperatorSpec};
pub use wave::{
    ball_points, ball_volume, localized_wave, mass_limit, oscillation_mass, spectral_perturbation,
    sup_deviation, LocalizedWave, SpectralAssembler, WaveSpec,
};
