//! Temporally stable coherent states `|J,γ>` for discrete, nondegenerate
//! spectra.
//!
//! The weights `rho_n = e_1 ... e_n` are the ones fixed by requiring
//! `<J,γ|H|J,γ> = omega J`. On top of them the crate builds coherent-state
//! amplitudes, evolves them in time, checks label continuity, resolution of
//! unity, temporal stability and the action identity numerically, and computes
//! energy-variance curves with their asymptotics at `J -> 0` and `J -> 1`.

#[cfg(feature = "cli")]
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod observables;
pub mod phase;
pub mod quadrature;
pub mod resolution;
pub mod spectrum;
pub mod state;
pub mod weights;

pub use dynamics::{
    evolve_amplitudes, evolve_coefficients, evolve_label, kinematic_representation_check,
    temporal_stability_residual, EvolvedState, StabilityResidual,
};
pub use error::{Error, Result};
pub use observables::{
    energy_mean, energy_mean_with, hydrogen_variance_bound, near_j_star_exponent, small_j_slope, variance,
    variance_curve, variance_with, ExponentFit, SlopeEstimate, VariancePoint,
};
pub use resolution::{
    builtin_measure, gamma_averaged_projector, load_measure, moment_check, unity_check, Measure, ProjectorMatrix,
};
pub use spectrum::{load_spectrum, Model, Spectrum, ValidationReport};
pub use state::{coefficients, coefficients_through, norm_deficit, overlap, StateCoefficients, StateLabel};
pub use weights::{
    compute_weights, convergence_radius, normalization, normalization_with, ConvergenceRadius, SeriesOptions,
    SeriesValue, WeightTable,
};
