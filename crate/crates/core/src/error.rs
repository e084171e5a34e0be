use thiserror::Error;

use crate::spectrum::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("failed to parse document: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("spectrum failed validation: {}", describe_violations(.0))]
    Validation(ValidationReport),

    #[error("level index {index} is beyond the explicit level list (last index {last})")]
    BeyondLevelList { index: usize, last: usize },

    #[error("J = {j} is outside the admissible range [0, {limit})")]
    OutOfRange { j: f64, limit: f64 },

    #[error(
        "tail bound not reached within {terms} terms (partial sum {partial:e}, tail bound {tail_bound:e})"
    )]
    TailNotReached {
        partial: f64,
        tail_bound: f64,
        terms: usize,
    },

    #[error("states live on different spectra ({left} vs {right})")]
    SpectrumMismatch { left: String, right: String },

    #[error("variance routes disagree at J = {j}: moments {moments:e}, pair sum {pair_sum:e}")]
    VarianceDisagreement { j: f64, moments: f64, pair_sum: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("analysis unavailable: {0}")]
    Unsupported(String),

    #[error("not enough usable points: {found} found, {needed} needed")]
    InsufficientPoints { found: usize, needed: usize },

    #[error("extrapolation unstable: {0}")]
    Extrapolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn describe_violations(report: &ValidationReport) -> String {
    report
        .violations
        .iter()
        .map(|v| format!("n={}: {}", v.n, v.description))
        .collect::<Vec<_>>()
        .join("; ")
}
