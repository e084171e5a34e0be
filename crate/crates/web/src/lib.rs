//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each exported function has a plain Rust counterpart returning
//! `Result<_, String>` so it can be tested natively.

use gkcs::{
    coefficients_through, compute_weights, evolve_coefficients, hydrogen_variance_bound, temporal_stability_residual,
    variance, Model, Spectrum, StateLabel, WeightTable,
};
use wasm_bindgen::prelude::*;

const N_MAX: usize = 20_000;
const TOL: f64 = 1e-12;

/// Largest J plotted for each model.
pub fn j_limit(model: Model) -> f64 {
    match model {
        Model::Harmonic => 10.0,
        Model::HydrogenLike => 0.995,
    }
}

fn setup(model: &str, omega: f64) -> Result<(Spectrum, WeightTable), String> {
    let model: Model = model.parse().map_err(|e: gkcs::Error| e.to_string())?;
    let s = Spectrum::builtin(model, omega).map_err(|e| e.to_string())?;
    let w = compute_weights(&s, N_MAX).map_err(|e| e.to_string())?;
    Ok((s, w))
}

/// `[J, v(J), bound(J)]` triples on `points` equally spaced J in
/// `[0, j_limit]`; the bound is NaN for the harmonic model.
pub fn variance_samples(model: &str, omega: f64, points: usize) -> Result<Vec<f64>, String> {
    let (s, w) = setup(model, omega)?;
    let m = s.model().expect("builtin");
    let top = j_limit(m);
    let mut out = Vec::with_capacity(3 * points);
    for k in 0..points {
        let j = if points > 1 { top * k as f64 / (points - 1) as f64 } else { 0.0 };
        let v = variance(&s, &w, j).map(|p| p.variance).unwrap_or(f64::NAN);
        let bound = match m {
            Model::HydrogenLike => hydrogen_variance_bound(omega, j),
            Model::Harmonic => f64::NAN,
        };
        out.extend([j, v, bound]);
    }
    Ok(out)
}

/// Interleaved `[re, im]` of `exp(-iHt)|J,γ>` for `n < count`.
pub fn evolved_amplitudes(model: &str, omega: f64, j: f64, gamma: f64, t: f64, count: usize) -> Result<Vec<f64>, String> {
    let (s, w) = setup(model, omega)?;
    if count == 0 || count > N_MAX {
        return Err(format!("count must lie in 1..={N_MAX}"));
    }
    let x = coefficients_through(&s, &w, StateLabel::new(j, gamma), TOL, count - 1).map_err(|e| e.to_string())?;
    let y = evolve_coefficients(&x, &s, t).map_err(|e| e.to_string())?;
    Ok(y.c.iter().take(count).flat_map(|z| [z.re, z.im]).collect())
}

/// `‖exp(-iHt)|J,γ> - |J,γ+ωt>‖`.
pub fn stability(model: &str, omega: f64, j: f64, gamma: f64, t: f64) -> Result<f64, String> {
    let (s, w) = setup(model, omega)?;
    temporal_stability_residual(&s, &w, StateLabel::new(j, gamma), t, TOL)
        .map(|r| r.residual)
        .map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = varianceCurve)]
pub fn variance_curve_js(model: &str, omega: f64, points: usize) -> Result<Vec<f64>, JsError> {
    variance_samples(model, omega, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = evolvedAmplitudes)]
pub fn evolved_amplitudes_js(model: &str, omega: f64, j: f64, gamma: f64, t: f64, count: usize) -> Result<Vec<f64>, JsError> {
    evolved_amplitudes(model, omega, j, gamma, t, count).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = stabilityResidual)]
pub fn stability_residual_js(model: &str, omega: f64, j: f64, gamma: f64, t: f64) -> Result<f64, JsError> {
    stability(model, omega, j, gamma, t).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = jLimit)]
pub fn j_limit_js(model: &str) -> Result<f64, JsError> {
    model
        .parse::<Model>()
        .map(j_limit)
        .map_err(|e| JsError::new(&e.to_string()))
}
