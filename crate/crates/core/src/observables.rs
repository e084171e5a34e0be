//! Energy moments, the action identity, and energy-variance curves with their
//! behaviour near `J = 0` and `J = J* = 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;
use crate::state::{compensated_sum, StateCoefficients};
use crate::weights::{sum_terms, SeriesOptions, Target, Terms, WeightTable};

/// Relative agreement required between the two variance routes.
pub const VARIANCE_AGREEMENT: f64 = 1e-8;

/// Above this many terms the pair sum is accumulated in streaming form
/// instead of the explicit double loop.
pub const DIRECT_PAIR_SUM_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariancePoint {
    pub j: f64,
    /// `<H>` in energy units.
    pub mean: f64,
    /// `<H^2>` in energy units squared.
    pub second_moment: f64,
    /// `<H^2> - <H>^2`, from centred moments.
    pub variance: f64,
    /// Same quantity from `½ Σ_nm (E_n - E_m)^2 p_n p_m`.
    pub pair_sum_variance: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

/// Energy-weighted distribution of a coherent state in dimensionless units.
struct Distribution {
    p: Vec<f64>,
    levels: Vec<f64>,
    terms: Terms,
}

impl Distribution {
    fn new(w: &WeightTable, j: f64, opts: &SeriesOptions, moments: usize) -> Result<Self> {
        w.check_label(j, opts.edge_eps)?;
        let terms = sum_terms(w, j, Target::Relative { tol: opts.tail_tol, moments })?;
        let p = terms.probabilities();
        let levels = w.levels()[..p.len()].to_vec();
        Ok(Distribution { p, levels, terms })
    }

    fn mean(&self) -> f64 {
        compensated_sum(self.p.iter().zip(&self.levels).map(|(p, e)| p * e))
    }

    fn centred_variance(&self, mean: f64) -> f64 {
        compensated_sum(self.p.iter().zip(&self.levels).map(|(p, e)| p * (e - mean) * (e - mean)))
    }

    fn pair_sum_variance(&self) -> f64 {
        if self.p.len() <= DIRECT_PAIR_SUM_LIMIT {
            let mut total = 0.0;
            for m in 1..self.p.len() {
                let mut row = 0.0;
                for n in 0..m {
                    let d = self.levels[m] - self.levels[n];
                    row += self.p[n] * d * d;
                }
                total += self.p[m] * row;
            }
            total
        } else {
            // Σ_{n<m} p_n (e_m - e_n)^2 = W (e_m - μ)^2 + M2 for the prefix
            // weight W, weighted mean μ and centred sum M2 of indices n < m.
            let (mut weight, mut mu, mut m2, mut total) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
            for (&p, &e) in self.p.iter().zip(&self.levels) {
                let d = e - mu;
                total += p * (m2 + weight * d * d);
                weight += p;
                mu += p / weight * d;
                m2 += p * d * (e - mu);
            }
            total
        }
    }

    /// Bound on the variance error from the omitted tails (dimensionless).
    fn tail_bound(&self, mean: f64, second: f64) -> f64 {
        let r0 = self.terms.relative_tail(0);
        let r1 = self.terms.relative_tail(1);
        let r2 = self.terms.relative_tail(2);
        let dm1 = r1 + mean * r0;
        let dm2 = r2 + second * r0;
        dm2 + 2.0 * mean * dm1 + dm1 * dm1
    }
}

pub fn energy_mean(s: &Spectrum, w: &WeightTable, j: f64) -> Result<f64> {
    energy_mean_with(s, w, j, &SeriesOptions::default())
}

/// `<J,γ|H|J,γ>`, which the action identity fixes to `omega * J`.
pub fn energy_mean_with(s: &Spectrum, w: &WeightTable, j: f64, opts: &SeriesOptions) -> Result<f64> {
    w.check_spectrum(s)?;
    let dist = Distribution::new(w, j, opts, 1)?;
    Ok(s.omega() * dist.mean())
}

pub fn variance(s: &Spectrum, w: &WeightTable, j: f64) -> Result<VariancePoint> {
    variance_with(s, w, j, &SeriesOptions::default())
}

pub fn variance_with(s: &Spectrum, w: &WeightTable, j: f64, opts: &SeriesOptions) -> Result<VariancePoint> {
    w.check_spectrum(s)?;
    let dist = Distribution::new(w, j, opts, 2)?;
    let mean = dist.mean();
    let v = dist.centred_variance(mean);
    let pair = dist.pair_sum_variance();
    let second = v + mean * mean;

    let allowance = VARIANCE_AGREEMENT * v.abs().max(pair.abs()) + 32.0 * f64::EPSILON * second;
    if (v - pair).abs() > allowance {
        return Err(Error::VarianceDisagreement { j, moments: v, pair_sum: pair });
    }

    let w2 = s.omega() * s.omega();
    Ok(VariancePoint {
        j,
        mean: s.omega() * mean,
        second_moment: w2 * second,
        variance: w2 * v,
        pair_sum_variance: w2 * pair,
        tail_bound: w2 * (dist.tail_bound(mean, second) + 8.0 * f64::EPSILON * second),
        terms_used: dist.p.len(),
    })
}

#[derive(Debug)]
pub struct CurveEntry {
    pub j: f64,
    pub result: Result<VariancePoint>,
}

/// Variance at every grid point, in grid order; failures are kept per point.
pub fn variance_curve(s: &Spectrum, w: &WeightTable, grid: &[f64], opts: &SeriesOptions) -> Vec<CurveEntry> {
    grid.iter()
        .map(|&j| CurveEntry { j, result: variance_with(s, w, j, opts) })
        .collect()
}

/// `(3 omega^2 / 4) J (1 - J)`, the hydrogen-like variance envelope.
pub fn hydrogen_variance_bound(omega: f64, j: f64) -> f64 {
    0.75 * omega * omega * j * (1.0 - j)
}

/// Mean energy and variance of an arbitrary amplitude vector.
pub fn state_energy(s: &Spectrum, x: &StateCoefficients) -> Result<(f64, f64)> {
    let probs: Vec<f64> = x.c.iter().map(|z| z.norm_sqr()).collect();
    let total = compensated_sum(probs.iter().copied());
    let mut energies = Vec::with_capacity(probs.len());
    for n in 0..probs.len() {
        energies.push(s.energy(n)?);
    }
    let mean = compensated_sum(probs.iter().zip(&energies).map(|(p, e)| p * e)) / total;
    let var = compensated_sum(probs.iter().zip(&energies).map(|(p, e)| p * (e - mean) * (e - mean))) / total;
    Ok((mean, var))
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeEstimate {
    /// Extrapolated `lim v(J) / (omega^2 J)`.
    pub slope: f64,
    /// `(J, v(J) / (omega^2 J))` samples.
    pub samples: Vec<(f64, f64)>,
    /// First-order Richardson values.
    pub first_order: Vec<f64>,
}

pub const SLOPE_SAMPLES: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// `lim_{J->0} v(J)/J` by second-order Richardson extrapolation on
/// `J = 1e-3, 1e-4, 1e-5`.
pub fn small_j_slope(s: &Spectrum, w: &WeightTable, opts: &SeriesOptions) -> Result<SlopeEstimate> {
    let w2 = s.omega() * s.omega();
    let mut samples = Vec::with_capacity(3);
    for &j in &SLOPE_SAMPLES {
        let v = variance_with(s, w, j, opts)?;
        samples.push((j, v.variance / (w2 * j)));
    }
    let g: Vec<f64> = samples.iter().map(|&(_, g)| g).collect();
    if g.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::Extrapolation(format!("non-positive samples {g:?}")));
    }
    let first_order = vec![(10.0 * g[1] - g[0]) / 9.0, (10.0 * g[2] - g[1]) / 9.0];
    let slope = (100.0 * first_order[1] - first_order[0]) / 99.0;
    if (slope - first_order[1]).abs() > 1e-6 * slope.abs() {
        return Err(Error::Extrapolation(format!(
            "tableau not settled: first order {first_order:?}, second order {slope}"
        )));
    }
    Ok(SlopeEstimate { slope, samples, first_order })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentFit {
    /// Least-squares slope of `ln v` against `ln(1 - J)`.
    pub exponent: f64,
    pub log_prefactor: f64,
    /// `(J, v(J))` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    /// Window points dropped because the series could not be truncated.
    pub skipped: Vec<f64>,
    /// `rho_inf Σ δ_m^2 / rho_m`, when the gaps look square-summable and the
    /// weights settle.
    pub leading_coefficient: Option<f64>,
    /// `v(J) / (omega^2 (1 - J))` at the point closest to `J = 1`.
    pub observed_coefficient: f64,
    /// Whether the two coefficients agree within 20 %.
    pub coefficient_consistent: Option<bool>,
}

/// Default window `J = 1 - 10^-(1 + k/2)`, `k = 1..=5`.
pub fn default_fit_window() -> Vec<f64> {
    (1..=5).map(|k| 1.0 - 10f64.powf(-(1.0 + 0.5 * k as f64))).collect()
}

/// Exponent `p` in `v(J) ∝ (1 - J)^p` near `J* = 1`.
pub fn near_j_star_exponent(
    s: &Spectrum,
    w: &WeightTable,
    window: Option<&[f64]>,
    opts: &SeriesOptions,
) -> Result<ExponentFit> {
    if s.e_star() != Some(1.0) {
        return Err(Error::Unsupported(format!(
            "near-J* analysis needs e_star = 1, spectrum '{}' has {:?}",
            s.name(),
            s.e_star()
        )));
    }
    let window = window.map(<[f64]>::to_vec).unwrap_or_else(default_fit_window);
    let w2 = s.omega() * s.omega();

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &j in &window {
        match variance_with(s, w, j, opts) {
            Ok(v) if v.variance > 0.0 => points.push((j, v.variance / w2)),
            Ok(_) | Err(Error::TailNotReached { .. }) | Err(Error::OutOfRange { .. }) => skipped.push(j),
            Err(e) => return Err(e),
        }
    }
    if points.len() < 3 {
        return Err(Error::InsufficientPoints { found: points.len(), needed: 3 });
    }

    let xs: Vec<f64> = points.iter().map(|&(j, _)| (1.0 - j).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();
    let (exponent, log_prefactor) = least_squares(&xs, &ys);

    let closest = points
        .iter()
        .copied()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least three points");
    let observed_coefficient = closest.1 / (1.0 - closest.0);
    let leading_coefficient = leading_coefficient(w);
    let coefficient_consistent = leading_coefficient.map(|c| (observed_coefficient / c - 1.0).abs() <= 0.2);

    Ok(ExponentFit {
        exponent,
        log_prefactor,
        points: points.iter().map(|&(j, v)| (j, v * w2)).collect(),
        skipped,
        leading_coefficient,
        observed_coefficient,
        coefficient_consistent,
    })
}

/// `rho_inf Σ δ_m^2 / rho_m` with `δ_m = 1 - e_m`, or `None` when the
/// weights have not settled or the sum is still growing at `n_max`.
pub fn leading_coefficient(w: &WeightTable) -> Option<f64> {
    let n_max = w.n_max();
    let half = n_max / 2;
    let log_rho = w.log_rho();
    if (log_rho[n_max] - log_rho[half]).abs() > 1e-3 {
        return None;
    }
    let terms: Vec<f64> = (0..=n_max)
        .map(|m| {
            let d = 1.0 - w.level(m);
            d * d * (-log_rho[m]).exp()
        })
        .collect();
    let total = compensated_sum(terms.iter().copied());
    let late = compensated_sum(terms[half..].iter().copied());
    if !(total.is_finite() && total > 0.0) || late > 1e-3 * total {
        return None;
    }
    Some(log_rho[n_max].exp() * total)
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::Model;
    use crate::state::{coefficients, StateLabel};
    use crate::weights::compute_weights;

    fn setup(model: Model, omega: f64) -> (Spectrum, WeightTable) {
        let s = Spectrum::builtin(model, omega).unwrap();
        let w = compute_weights(&s, 20_000).unwrap();
        (s, w)
    }

    #[test]
    fn action_identity_points() {
        for model in [Model::Harmonic, Model::HydrogenLike] {
            let (s, w) = setup(model, 1.0);
            assert!((energy_mean(&s, &w, 0.3).unwrap() - 0.3).abs() < 1e-10);
            assert_eq!(energy_mean(&s, &w, 0.0).unwrap(), 0.0);
        }
        let (s, w) = setup(Model::Harmonic, 2.0);
        assert!((energy_mean(&s, &w, 1.5).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn harmonic_variance_is_poisson() {
        let (s, w) = setup(Model::Harmonic, 1.0);
        for j in [0.5, 1.0, 2.0, 7.0] {
            let v = variance(&s, &w, j).unwrap();
            assert!((v.variance - j).abs() < 1e-10 * j.max(1.0), "J={j}: {v:?}");
        }
        let (s, w) = setup(Model::Harmonic, 3.0);
        let v = variance(&s, &w, 1.0).unwrap();
        assert!((v.variance - 9.0).abs() < 1e-9);
    }

    #[test]
    fn harmonic_double_sum_oracle() {
        // independent evaluation of ½ Σ_nm (n - m)^2 J^(n+m)/(n! m!) / e^(2J) to n = 80
        let j: f64 = 1.7;
        let mut p = vec![(-j).exp()];
        for n in 1..=80 {
            let prev = p[n - 1];
            p.push(prev * j / n as f64);
        }
        let mut v = 0.0;
        for n in 0..=80 {
            for m in 0..=80 {
                let d = n as f64 - m as f64;
                v += 0.5 * d * d * p[n] * p[m];
            }
        }
        assert!((v - j).abs() < 1e-12);
        let (s, w) = setup(Model::Harmonic, 1.0);
        let point = variance(&s, &w, j).unwrap();
        assert!((point.pair_sum_variance - v).abs() <= point.tail_bound, "{point:?} vs {v}");
        let tight = SeriesOptions { tail_tol: 1e-15, ..SeriesOptions::default() };
        let point = variance_with(&s, &w, j, &tight).unwrap();
        assert!((point.pair_sum_variance - v).abs() < 1e-13, "{point:?} vs {v}");
    }

    #[test]
    fn variance_vanishes_at_zero() {
        let (s, w) = setup(Model::HydrogenLike, 1.0);
        let v = variance(&s, &w, 0.0).unwrap();
        assert_eq!(v.variance, 0.0);
        assert_eq!(v.mean, 0.0);
    }

    #[test]
    fn hydrogen_bound_on_grid() {
        let (s, w) = setup(Model::HydrogenLike, 1.0);
        let v = variance(&s, &w, 0.5).unwrap();
        assert!(v.variance <= 0.1875);
        let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        for entry in variance_curve(&s, &w, &grid, &SeriesOptions::default()) {
            let p = entry.result.unwrap();
            assert!(p.variance <= hydrogen_variance_bound(1.0, entry.j) + p.tail_bound);
        }
    }

    #[test]
    fn streaming_pair_sum_matches_direct() {
        let (s, w) = setup(Model::HydrogenLike, 1.0);
        // 0.995 needs several thousand terms, above the direct limit
        let v = variance(&s, &w, 0.995).unwrap();
        assert!(v.terms_used > DIRECT_PAIR_SUM_LIMIT);
        assert!((v.variance - v.pair_sum_variance).abs() <= 1e-10 * v.variance);
    }

    #[test]
    fn curve_keeps_order_and_flags_failures() {
        let (s, w) = setup(Model::HydrogenLike, 1.0);
        let curve = variance_curve(&s, &w, &[0.0, 0.4, 1.5, 0.2], &SeriesOptions::default());
        assert_eq!(curve.iter().map(|e| e.j).collect::<Vec<_>>(), vec![0.0, 0.4, 1.5, 0.2]);
        assert_eq!(curve[0].result.as_ref().unwrap().variance, 0.0);
        assert!(matches!(curve[2].result, Err(Error::OutOfRange { .. })));
        assert!(curve[3].result.is_ok());
        assert!(variance_curve(&s, &w, &[], &SeriesOptions::default()).is_empty());
    }

    #[test]
    fn slopes_match_first_level() {
        let (s, w) = setup(Model::Harmonic, 1.0);
        let slope = small_j_slope(&s, &w, &SeriesOptions::default()).unwrap().slope;
        assert!((slope - 1.0).abs() < 1e-6);

        let (s, w) = setup(Model::HydrogenLike, 2.0);
        // oracle: direct v(J)/J at J = 1e-5
        let direct = variance(&s, &w, 1e-5).unwrap().variance / (4.0 * 1e-5);
        assert!((direct - 0.75).abs() < 1e-4);
        let slope = small_j_slope(&s, &w, &SeriesOptions::default()).unwrap().slope;
        assert!((slope - 0.75).abs() < 1e-8);

        let s = Spectrum::explicit("e1=2", 1.0, &[0.0, 2.0, 3.0, 5.0, 8.0, 13.0], None).unwrap();
        let w = compute_weights(&s, 5).unwrap();
        let slope = small_j_slope(&s, &w, &SeriesOptions::default()).unwrap().slope;
        assert!((slope - 2.0).abs() < 1e-8);
    }

    #[test]
    fn gamma_independence_from_states() {
        let (s, w) = setup(Model::HydrogenLike, 1.5);
        let a = coefficients(&s, &w, StateLabel::new(0.6, 0.0), 1e-13).unwrap();
        let b = coefficients(&s, &w, StateLabel::new(0.6, 7.3), 1e-13).unwrap();
        let (ma, va) = state_energy(&s, &a).unwrap();
        let (mb, vb) = state_energy(&s, &b).unwrap();
        assert!((ma - mb).abs() < 1e-14 && (va - vb).abs() < 1e-14);
        assert!((ma - 1.5 * 0.6).abs() < 1e-10);
        let v = variance(&s, &w, 0.6).unwrap();
        assert!((va - v.variance).abs() < 1e-10);
    }

    #[test]
    fn near_j_star_needs_unit_radius() {
        let (s, w) = setup(Model::Harmonic, 1.0);
        assert!(matches!(
            near_j_star_exponent(&s, &w, None, &SeriesOptions::default()),
            Err(Error::Unsupported(_))
        ));
        let (s, w) = setup(Model::HydrogenLike, 1.0);
        // too few weights for any window point beyond the first
        let small = compute_weights(&s, 100).unwrap();
        assert!(matches!(
            near_j_star_exponent(&s, &small, None, &SeriesOptions::default()),
            Err(Error::InsufficientPoints { .. })
        ));
        drop(w);
    }

    #[test]
    fn default_window_spans_the_band() {
        let win = default_fit_window();
        assert_eq!(win.len(), 5);
        assert!((win[0] - (1.0 - 10f64.powf(-1.5))).abs() < 1e-15);
        assert!((win[4] - (1.0 - 10f64.powf(-3.5))).abs() < 1e-15);
    }

    #[test]
    fn hydrogen_linear_regime_and_coefficient() {
        let s = Spectrum::builtin(Model::HydrogenLike, 1.0).unwrap();
        let w = compute_weights(&s, 200_000).unwrap();
        let fit = near_j_star_exponent(&s, &w, None, &SeriesOptions::default()).unwrap();
        assert!((fit.exponent - 1.0).abs() < 0.1, "{fit:?}");
        let c = fit.leading_coefficient.unwrap();
        // ρ_∞ Σ δ_m²/ρ_m = ½ Σ 2/((m+1)^3 (m+2)) = 0.557122836...; the table
        // uses ρ_{n_max} = ½ (1 + 1/(n_max+1)) for ρ_∞
        assert!((c - 0.557_122_836).abs() < 1e-5, "{c}");
        assert_eq!(fit.coefficient_consistent, Some(true));
    }

    #[test]
    fn inverse_gap_spectrum_closed_form() {
        // e_n = 1 - 1/(n+1): rho_n = 1/(n+1), N = (1-J)^-2 and
        // v = (1-J)^2 (-ln(1-J)/J - 1).
        let s = Spectrum::from_fn("inverse_gap", 1.0, Some(1.0), |n| 1.0 - 1.0 / (n as f64 + 1.0)).unwrap();
        let w = compute_weights(&s, 200_000).unwrap();
        for j in [0.3, 0.9, 0.99, 0.999] {
            let v = variance(&s, &w, j).unwrap().variance;
            let closed = (1.0 - j) * (1.0 - j) * (-(-j).ln_1p() / j - 1.0);
            assert!((v - closed).abs() < 1e-9 * closed, "J={j}: {v} vs {closed}");
        }
        // ε² ln(1/ε) behaviour: fitted exponent sits between 1 and 2, not at 1
        let fit = near_j_star_exponent(&s, &w, None, &SeriesOptions::default()).unwrap();
        assert!(fit.exponent > 1.5 && fit.exponent < 2.0, "{fit:?}");
        assert!(fit.leading_coefficient.is_none());
    }

    #[test]
    fn quarter_root_gaps_fall_steeply() {
        // δ_n = (n+1)^-1/4: the weights peak near n ~ (1-J)^-4 and a saddle
        // point gives v ~ (1-J)^5, far from (1-J)^1/2
        let s = Spectrum::from_fn("quarter_root", 1.0, Some(1.0), |n| 1.0 - (n as f64 + 1.0).powf(-0.25)).unwrap();
        let w = compute_weights(&s, 20_000).unwrap();
        let fit = near_j_star_exponent(&s, &w, Some(&[0.85, 0.875, 0.9]), &SeriesOptions::default()).unwrap();
        assert!(fit.exponent > 4.0 && fit.exponent < 5.5, "{fit:?}");
        assert!(matches!(
            near_j_star_exponent(&s, &w, None, &SeriesOptions::default()),
            Err(Error::InsufficientPoints { found: 0, .. })
        ));
    }
}
