//! Weight factors `rho_n = e_1 e_2 ... e_n`, the convergence radius `J*`, and
//! the normalization series `N(J) = sum J^n / rho_n` with a certified tail.
//!
//! Weights are stored as `ln rho_n`: they overflow (harmonic, `n!`) or settle
//! to small constants (hydrogen-like, `1/2`) long before useful truncations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

/// Default absolute tolerance on series tails.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
/// Default relative guard distance from `J*`.
pub const DEFAULT_EDGE_EPS: f64 = 1e-6;
/// Default cap on the number of weights.
pub const DEFAULT_N_MAX: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ConvergenceRadius {
    Infinite,
    /// Limit of the dimensionless levels, known from the spectrum.
    Exact(f64),
    /// `rho_n^(1/n)` at the last computed `n`; never used to admit labels.
    Estimated(f64),
}

impl ConvergenceRadius {
    pub fn value(self) -> f64 {
        match self {
            ConvergenceRadius::Infinite => f64::INFINITY,
            ConvergenceRadius::Exact(v) | ConvergenceRadius::Estimated(v) => v,
        }
    }

    pub fn is_estimated(self) -> bool {
        matches!(self, ConvergenceRadius::Estimated(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub tail_tol: f64,
    pub edge_eps: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            tail_tol: DEFAULT_TAIL_TOL,
            edge_eps: DEFAULT_EDGE_EPS,
        }
    }
}

/// `ln rho_n` for `n = 0 ..= n_max` together with the levels they came from.
#[derive(Debug, Clone)]
pub struct WeightTable {
    tag: String,
    levels: Vec<f64>,
    ln_levels: Vec<f64>,
    log_rho: Vec<f64>,
    level_bound: Option<f64>,
    j_star: ConvergenceRadius,
}

/// A partial sum with a certified bound on the omitted tail:
/// the full sum lies in `[value, value + tail_bound]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

pub fn compute_weights(s: &Spectrum, n_max: usize) -> Result<WeightTable> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    if let Some(last) = s.last_index() {
        if n_max > last {
            return Err(Error::BeyondLevelList { index: n_max, last });
        }
    }
    let report = s.validate(n_max);
    if !report.ok {
        return Err(Error::Validation(report));
    }

    let levels = s.levels(n_max)?;
    let mut ln_levels = Vec::with_capacity(n_max + 1);
    ln_levels.push(f64::NEG_INFINITY);
    for n in 1..=n_max {
        ln_levels.push(s.ln_level(n)?);
    }

    // Neumaier-compensated running sum of ln e_l.
    let mut log_rho = Vec::with_capacity(n_max + 1);
    log_rho.push(0.0);
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for &x in &ln_levels[1..] {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        log_rho.push(sum + comp);
    }

    let level_bound = s.e_star().filter(|e| e.is_finite());
    let j_star = match s.e_star() {
        Some(e) if e.is_infinite() => ConvergenceRadius::Infinite,
        Some(e) => ConvergenceRadius::Exact(e),
        None => ConvergenceRadius::Estimated((log_rho[n_max] / n_max as f64).exp()),
    };

    Ok(WeightTable {
        tag: s.tag(),
        levels,
        ln_levels,
        log_rho,
        level_bound,
        j_star,
    })
}

pub fn convergence_radius(w: &WeightTable) -> ConvergenceRadius {
    w.j_star
}

impl WeightTable {
    pub fn n_max(&self) -> usize {
        self.log_rho.len() - 1
    }

    pub fn log_rho(&self) -> &[f64] {
        &self.log_rho
    }

    pub fn rho(&self, n: usize) -> f64 {
        self.log_rho[n].exp()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> f64 {
        self.levels[n]
    }

    pub fn j_star(&self) -> ConvergenceRadius {
        self.j_star
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub(crate) fn check_spectrum(&self, s: &Spectrum) -> Result<()> {
        let tag = s.tag();
        if tag == self.tag {
            Ok(())
        } else {
            Err(Error::SpectrumMismatch { left: self.tag.clone(), right: tag })
        }
    }

    /// Rejects `J < 0`, non-finite `J`, and `J` within `edge_eps * J*` of a
    /// known radius. An estimated radius is not used to reject or admit.
    pub fn check_label(&self, j: f64, edge_eps: f64) -> Result<()> {
        if !(j.is_finite() && j >= 0.0) {
            return Err(Error::OutOfRange { j, limit: self.j_star.value() });
        }
        if let ConvergenceRadius::Exact(limit) = self.j_star {
            if j > limit * (1.0 - edge_eps) {
                return Err(Error::OutOfRange { j, limit });
            }
        }
        Ok(())
    }
}

pub fn normalization(w: &WeightTable, j: f64) -> Result<SeriesValue> {
    normalization_with(w, j, &SeriesOptions::default())
}

pub fn normalization_with(w: &WeightTable, j: f64, opts: &SeriesOptions) -> Result<SeriesValue> {
    w.check_label(j, opts.edge_eps)?;
    let terms = sum_terms(w, j, Target::Absolute(opts.tail_tol))?;
    Ok(SeriesValue {
        value: terms.log_sum().exp(),
        tail_bound: terms.log_tail[0].exp(),
        terms_used: terms.len(),
    })
}

/// Stopping rule for [`sum_terms`].
#[derive(Debug, Clone, Copy)]
pub(crate) enum Target {
    /// Tail of `sum J^n/rho_n` below an absolute tolerance.
    Absolute(f64),
    /// Tails of `sum e_n^k J^n/rho_n` below `tol` times their partial sums,
    /// for every `k <= moments`.
    Relative { tol: f64, moments: usize },
}

/// Terms `t_n = J^n / rho_n` held relative to the largest one.
#[derive(Debug, Clone)]
pub(crate) struct Terms {
    pub log_scale: f64,
    pub scaled: Vec<f64>,
    pub scaled_sum: f64,
    /// `ln` of certified bounds on the omitted tails of the `k`-th moment sums.
    pub log_tail: [f64; 3],
}

impl Terms {
    pub fn len(&self) -> usize {
        self.scaled.len()
    }

    pub fn log_sum(&self) -> f64 {
        self.log_scale + self.scaled_sum.ln()
    }

    /// Tail of moment `k` relative to the partial normalization sum.
    pub fn relative_tail(&self, k: usize) -> f64 {
        (self.log_tail[k] - self.log_sum()).exp()
    }

    /// Normalized weights `t_n / sum t`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.scaled.iter().map(|t| t / self.scaled_sum).collect()
    }
}

fn ln_ratio_tail(ln_r: f64) -> f64 {
    // ln(r / (1 - r)) for r = exp(ln_r) < 1
    ln_r - (-ln_r.exp_m1()).ln()
}

pub(crate) fn sum_terms(w: &WeightTable, j: f64, target: Target) -> Result<Terms> {
    if j == 0.0 {
        return Ok(Terms {
            log_scale: 0.0,
            scaled: vec![1.0],
            scaled_sum: 1.0,
            log_tail: [f64::NEG_INFINITY; 3],
        });
    }
    let ln_j = j.ln();
    let n_max = w.n_max();
    let moments = match target {
        Target::Absolute(_) => 0,
        Target::Relative { moments, .. } => moments.min(2),
    };
    let ln_bound = w.level_bound.map(f64::ln);

    let mut log_terms: Vec<f64> = Vec::new();
    let mut scale = f64::NEG_INFINITY;
    let mut sums = [0.0_f64; 3];
    let mut log_tail = [f64::INFINITY; 3];

    for n in 0..=n_max {
        let lt = n as f64 * ln_j - w.log_rho[n];
        log_terms.push(lt);
        if lt > scale {
            let f = (scale - lt).exp();
            sums.iter_mut().for_each(|s| *s *= f);
            scale = lt;
        }
        let x = (lt - scale).exp();
        let e = w.levels[n];
        sums[0] += x;
        sums[1] += x * e;
        sums[2] += x * e * e;

        if n == n_max {
            break;
        }
        let ln_q = ln_j - w.ln_levels[n + 1];
        if ln_q >= 0.0 {
            continue;
        }
        log_tail[0] = lt + ln_ratio_tail(ln_q);
        for k in 1..=moments {
            log_tail[k] = match ln_bound {
                Some(lb) => log_tail[0] + k as f64 * lb,
                None if n >= 1 => {
                    let ln_r = ln_q + k as f64 * (w.ln_levels[n + 1] - w.ln_levels[n]);
                    if ln_r < 0.0 {
                        lt + k as f64 * w.ln_levels[n] + ln_ratio_tail(ln_r)
                    } else {
                        f64::INFINITY
                    }
                }
                None => f64::INFINITY,
            };
        }

        let done = match target {
            Target::Absolute(tol) => log_tail[0] <= tol.ln(),
            Target::Relative { tol, .. } => (0..=moments).all(|k| {
                sums[k] > 0.0 && log_tail[k] - (scale + sums[k].ln()) <= tol.ln()
            }),
        };
        if done {
            let scaled: Vec<f64> = log_terms.iter().map(|l| (l - scale).exp()).collect();
            for t in log_tail.iter_mut().skip(moments + 1) {
                *t = f64::INFINITY;
            }
            return Ok(Terms {
                log_scale: scale,
                scaled,
                scaled_sum: sums[0],
                log_tail,
            });
        }
    }

    Err(Error::TailNotReached {
        partial: (scale + sums[0].ln()).exp(),
        tail_bound: log_tail[0].exp(),
        terms: log_terms.len(),
    })
}
