//! Time evolution in the energy eigenbasis and the temporal-stability checks.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::phase::unit_phase;
use crate::spectrum::Spectrum;
use crate::state::{coefficient_distance, coefficients, overlap_error_bound, StateCoefficients, StateLabel};
use crate::weights::WeightTable;

#[derive(Debug, Clone)]
pub struct EvolvedState {
    pub c: Vec<Complex64>,
    /// Elapsed time in physical units (`omega * t` is dimensionless).
    pub t: f64,
    pub source_label: Option<StateLabel>,
}

/// The label flow `(J, γ) -> (J, γ + omega t)`.
pub fn evolve_label(label: StateLabel, t: f64, omega: f64) -> StateLabel {
    StateLabel { j: label.j, gamma: label.gamma + omega * t }
}

/// `c_n -> exp(-i omega e_n t) c_n` for any amplitude sequence over `s`.
pub fn evolve_amplitudes(amplitudes: &[Complex64], s: &Spectrum, t: f64) -> Result<Vec<Complex64>> {
    let wt = s.omega() * t;
    amplitudes
        .iter()
        .enumerate()
        .map(|(n, c)| Ok(c * unit_phase(s.level(n)?, wt)))
        .collect()
}

pub fn evolve_coefficients(x: &StateCoefficients, s: &Spectrum, t: f64) -> Result<EvolvedState> {
    Ok(EvolvedState {
        c: evolve_amplitudes(&x.c, s, t)?,
        t,
        source_label: Some(x.label),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityResidual {
    /// `‖exp(-iHt)|l> - |l(t)>‖` over the truncated basis.
    pub residual: f64,
    pub evolved_label: StateLabel,
    /// Combined truncation allowance of the two states.
    pub tail_bound: f64,
    pub terms_used: usize,
}

/// Distance between the evolved coherent state and the coherent state at the
/// evolved label. Both vectors share one truncation since it depends on J only.
pub fn temporal_stability_residual(
    s: &Spectrum,
    w: &WeightTable,
    label: StateLabel,
    t: f64,
    tol: f64,
) -> Result<StabilityResidual> {
    let start = coefficients(s, w, label, tol)?;
    let evolved = evolve_coefficients(&start, s, t)?;
    let evolved_label = evolve_label(label, t, s.omega());
    let reference = coefficients(s, w, evolved_label, tol)?;
    Ok(StabilityResidual {
        residual: coefficient_distance(&evolved.c, &reference.c),
        evolved_label,
        tail_bound: overlap_error_bound(&start, &reference),
        terms_used: reference.len(),
    })
}

/// `(<l|ψ,t>, <l(-t)|ψ>)`: evolving the state versus moving the label back.
pub fn kinematic_representation_check(
    s: &Spectrum,
    w: &WeightTable,
    psi: &[Complex64],
    label: StateLabel,
    t: f64,
    tol: f64,
) -> Result<(Complex64, Complex64)> {
    let here = coefficients(s, w, label, tol)?;
    let back = coefficients(s, w, evolve_label(label, -t, s.omega()), tol)?;
    let psi_t = evolve_amplitudes(psi, s, t)?;
    let lhs = here.c.iter().zip(&psi_t).map(|(a, b)| a.conj() * b).sum();
    let rhs = back.c.iter().zip(psi).map(|(a, b)| a.conj() * b).sum();
    Ok((lhs, rhs))
}
