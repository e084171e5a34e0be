//! Coherent-state amplitudes in the energy eigenbasis.
//!
//! `|J,γ> = N(J)^(-1/2) Σ J^(n/2) exp(-i e_n γ) / sqrt(rho_n) |n>`, truncated
//! where the certified tail mass drops below the requested tolerance.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase::unit_phase;
use crate::spectrum::Spectrum;
use crate::weights::{sum_terms, Target, WeightTable, DEFAULT_EDGE_EPS};

/// Allowance for rounding in the normalized squared amplitudes.
pub const ROUNDOFF_MASS: f64 = 16.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateLabel {
    pub j: f64,
    /// Unreduced angle; phases are not periodic in γ for general spectra.
    pub gamma: f64,
}

impl StateLabel {
    pub fn new(j: f64, gamma: f64) -> Self {
        StateLabel { j, gamma }
    }
}

#[derive(Debug, Clone)]
pub struct StateCoefficients {
    pub c: Vec<Complex64>,
    /// Bound on `|1 - Σ|c_n|^2|` covering the omitted tail and rounding.
    pub tail_mass_bound: f64,
    pub label: StateLabel,
    pub(crate) basis: String,
}

impl StateCoefficients {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn basis(&self) -> &str {
        &self.basis
    }

    /// Amplitudes as `[re, im]` pairs.
    pub fn as_pairs(&self) -> Vec<[f64; 2]> {
        self.c.iter().map(|z| [z.re, z.im]).collect()
    }
}

pub fn coefficients(s: &Spectrum, w: &WeightTable, label: StateLabel, tol: f64) -> Result<StateCoefficients> {
    coefficients_through(s, w, label, tol, 0)
}

/// Like [`coefficients`], but keeps every index `n <= n_last` even when the
/// tail target is met earlier.
pub fn coefficients_through(
    s: &Spectrum,
    w: &WeightTable,
    label: StateLabel,
    tol: f64,
    n_last: usize,
) -> Result<StateCoefficients> {
    w.check_spectrum(s)?;
    if n_last > w.n_max() {
        return Err(Error::BeyondLevelList { index: n_last, last: w.n_max() });
    }
    if !(tol > ROUNDOFF_MASS) {
        return Err(Error::InvalidParameter(format!("tolerance must exceed {ROUNDOFF_MASS:e}, got {tol:e}")));
    }
    if !label.gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be finite, got {}", label.gamma)));
    }
    w.check_label(label.j, DEFAULT_EDGE_EPS)?;
    let mut terms = sum_terms(w, label.j, Target::Relative { tol: tol - ROUNDOFF_MASS, moments: 0 })?;
    let ln_j = label.j.ln();
    for n in terms.len()..=n_last {
        let t = if label.j == 0.0 { 0.0 } else { (n as f64 * ln_j - w.log_rho()[n] - terms.log_scale).exp() };
        terms.scaled.push(t);
        terms.scaled_sum += t;
    }

    let c = terms
        .scaled
        .iter()
        .enumerate()
        .map(|(n, t)| (t / terms.scaled_sum).sqrt() * unit_phase(w.level(n), label.gamma))
        .collect();

    Ok(StateCoefficients {
        c,
        tail_mass_bound: terms.relative_tail(0) + ROUNDOFF_MASS,
        label,
        basis: w.tag().to_string(),
    })
}

fn check_basis(a: &StateCoefficients, b: &StateCoefficients) -> Result<()> {
    if a.basis == b.basis {
        Ok(())
    } else {
        Err(Error::SpectrumMismatch { left: a.basis.clone(), right: b.basis.clone() })
    }
}

/// `<a|b> = Σ conj(a_n) b_n`; the shorter vector is zero-padded.
pub fn overlap(a: &StateCoefficients, b: &StateCoefficients) -> Result<Complex64> {
    check_basis(a, b)?;
    Ok(a.c.iter().zip(&b.c).map(|(x, y)| x.conj() * y).sum())
}

/// Combined error allowance for an overlap of two truncated states.
pub fn overlap_error_bound(a: &StateCoefficients, b: &StateCoefficients) -> f64 {
    a.tail_mass_bound + b.tail_mass_bound
}

pub fn norm_deficit(x: &StateCoefficients) -> f64 {
    (1.0 - compensated_sum(x.c.iter().map(|z| z.norm_sqr()))).abs()
}

pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Euclidean distance between amplitude vectors, zero-padding the shorter.
pub fn coefficient_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let n = a.len().max(b.len());
    let zero = Complex64::new(0.0, 0.0);
    (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(zero);
            let y = b.get(i).copied().unwrap_or(zero);
            (x - y).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityProbe {
    pub label: StateLabel,
    /// Largest observed `‖c(l') - c(l)‖ / (|ΔJ| + |Δγ|)`.
    pub constant: f64,
    /// `(step, ratio)` for every probed displacement.
    pub samples: Vec<(f64, f64)>,
}

/// Empirical Lipschitz constant of the label map around `label`, probed by
/// displacements of size `steps` along J, γ and the diagonal.
pub fn continuity_probe(
    s: &Spectrum,
    w: &WeightTable,
    label: StateLabel,
    steps: &[f64],
    tol: f64,
) -> Result<ContinuityProbe> {
    let centre = coefficients(s, w, label, tol)?;
    let mut samples = Vec::new();
    let mut constant = 0.0_f64;
    for &h in steps {
        for (dj, dg) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h), (h, h), (h, -h)] {
            if label.j + dj < 0.0 {
                continue;
            }
            let other = coefficients(s, w, StateLabel::new(label.j + dj, label.gamma + dg), tol)?;
            let ratio = coefficient_distance(&centre.c, &other.c) / (dj.abs() + dg.abs());
            constant = constant.max(ratio);
            samples.push((h, ratio));
        }
    }
    Ok(ContinuityProbe { label, constant, samples })
}
