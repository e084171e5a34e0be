//! Resolution-of-unity checks: power moments of a weight measure against the
//! weights `rho_n`, the γ-averaged projector, and the diagonal of
//! `∫ |J,γ><J,γ| dμ`.
//!
//! Measures carry point atoms besides a density. The hydrogen-like weights tend
//! to `1/2`, which no density on `[0, 1)` can reproduce, so its measure puts
//! mass `1/2` at `u = 1`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_laguerre, gauss_legendre, with_doubling};
use crate::spectrum::{Model, Spectrum};
use crate::weights::{normalization, ConvergenceRadius, WeightTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    Zero,
    /// `scale * exp(-rate u)`.
    Exponential {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        rate: f64,
    },
    Constant { value: f64 },
    /// Piecewise linear through `(u_i, rho_i)`, zero outside the table.
    Table { u: Vec<f64>, rho: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub u: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureHint {
    FiniteInterval,
    SemiInfiniteExponential,
}

#[derive(Debug, Clone, Serialize)]
pub struct Measure {
    density: Density,
    upper: f64,
    atoms: Vec<Atom>,
    hint: QuadratureHint,
}

impl Measure {
    pub fn new(density: Density, upper: f64, atoms: Vec<Atom>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(upper > 0.0) {
            return bad(format!("upper limit must be positive, got {upper}"));
        }
        for a in &atoms {
            if !(a.w > 0.0 && a.w.is_finite()) {
                return bad(format!("atom mass must be positive, got {}", a.w));
            }
            if !(a.u >= 0.0 && a.u <= upper && a.u.is_finite()) {
                return bad(format!("atom location {} outside [0, {upper}]", a.u));
            }
        }
        match &density {
            Density::Zero => {}
            Density::Exponential { scale, rate } => {
                if !(*scale >= 0.0 && scale.is_finite()) || !(rate.is_finite()) {
                    return bad("exponential density needs finite scale >= 0 and finite rate".into());
                }
                if upper.is_infinite() && !(*rate > 0.0) {
                    return bad("exponential density on [0, ∞) needs rate > 0".into());
                }
            }
            Density::Constant { value } => {
                if !(*value >= 0.0 && value.is_finite()) {
                    return bad(format!("constant density must be >= 0, got {value}"));
                }
                if upper.is_infinite() && *value > 0.0 {
                    return bad("constant density on [0, ∞) has no finite moments".into());
                }
            }
            Density::Table { u, rho } => {
                if u.len() != rho.len() || u.len() < 2 {
                    return bad("density table needs matching 'u' and 'rho' of length >= 2".into());
                }
                if !u.windows(2).all(|p| p[1] > p[0]) || u[0] < 0.0 || *u.last().unwrap() > upper {
                    return bad(format!("table abscissae must increase within [0, {upper}]"));
                }
                if rho.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                    return bad("table density values must be finite and >= 0".into());
                }
            }
        }
        let hint = if upper.is_infinite() {
            QuadratureHint::SemiInfiniteExponential
        } else {
            QuadratureHint::FiniteInterval
        };
        Ok(Measure { density, upper, atoms, hint })
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn hint(&self) -> QuadratureHint {
        self.hint
    }

    /// `∫_0^U u^n rho(u) du + Σ w_k u_k^n`.
    pub fn moment(&self, n: usize) -> Result<f64> {
        let k = n as i32;
        let continuous = match &self.density {
            Density::Zero => 0.0,
            Density::Exponential { scale, rate } if self.upper.is_infinite() => {
                let reduced = with_doubling(|m| gauss_laguerre(m).sum(|x| x.powi(k)))?;
                scale * reduced / rate.powi(k + 1)
            }
            Density::Exponential { scale, rate } => {
                let (scale, rate) = (*scale, *rate);
                with_doubling(|m| legendre_on(m, 0.0, self.upper, |u| scale * (-rate * u).exp() * u.powi(k)))?
            }
            Density::Constant { value } => {
                let value = *value;
                with_doubling(|m| legendre_on(m, 0.0, self.upper, |u| value * u.powi(k)))?
            }
            Density::Table { u, rho } => with_doubling(|m| {
                u.windows(2)
                    .zip(rho.windows(2))
                    .map(|(us, rs)| {
                        let slope = (rs[1] - rs[0]) / (us[1] - us[0]);
                        legendre_on(m, us[0], us[1], |x| (rs[0] + slope * (x - us[0])) * x.powi(k))
                    })
                    .sum()
            })?,
        };
        let discrete: f64 = self.atoms.iter().map(|a| a.w * a.u.powi(k)).sum();
        Ok(continuous + discrete)
    }
}

fn legendre_on(m: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    half * gauss_legendre(m).sum(|t| f(mid + half * t))
}

/// Measure document: `{"U": float | "inf", "density": {...}, "atoms": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureDocument {
    #[serde(rename = "U")]
    pub upper: UpperLimit,
    #[serde(default = "zero_density")]
    pub density: Density,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

fn zero_density() -> Density {
    Density::Zero
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UpperLimit {
    Finite(f64),
    Named(String),
}

impl MeasureDocument {
    pub fn into_measure(self) -> Result<Measure> {
        let upper = match self.upper {
            UpperLimit::Finite(u) => u,
            UpperLimit::Named(s) if s == "inf" || s == "infinity" => f64::INFINITY,
            UpperLimit::Named(s) => return Err(Error::InvalidParameter(format!("bad upper limit '{s}'"))),
        };
        Measure::new(self.density, upper, self.atoms)
    }
}

pub fn load_measure(document: &str) -> Result<Measure> {
    serde_json::from_str::<MeasureDocument>(document)?.into_measure()
}

pub fn builtin_measure(model: Model) -> Measure {
    match model {
        Model::Harmonic => Measure::new(Density::Exponential { scale: 1.0, rate: 1.0 }, f64::INFINITY, vec![]),
        Model::HydrogenLike => Measure::new(Density::Constant { value: 0.5 }, 1.0, vec![Atom { u: 1.0, w: 0.5 }]),
    }
    .expect("builtin measures are valid")
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentRow {
    pub n: usize,
    pub rho: f64,
    pub moment: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    pub max_rel_error: f64,
}

pub fn moment_check(m: &Measure, w: &WeightTable, n_check: usize) -> Result<MomentReport> {
    if n_check > w.n_max() {
        return Err(Error::BeyondLevelList { index: n_check, last: w.n_max() });
    }
    let mut rows = Vec::with_capacity(n_check + 1);
    for n in 0..=n_check {
        let rho = w.rho(n);
        let moment = m.moment(n)?;
        rows.push(MomentRow { n, rho, moment, rel_error: (moment - rho).abs() / rho });
    }
    let max_rel_error = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    Ok(MomentReport { rows, max_rel_error })
}

/// Diagonal of `∫ k(J) dJ ∫ dν(γ) |J,γ><J,γ|` with `k = N rho`:
/// `d_n = (1/rho_n) ∫_0^U J^n rho(J) dJ`, all equal to one for a resolution
/// of unity.
pub fn unity_check(m: &Measure, w: &WeightTable, s: &Spectrum, n_check: usize) -> Result<Vec<f64>> {
    w.check_spectrum(s)?;
    let matches = match w.j_star() {
        ConvergenceRadius::Infinite => m.upper.is_infinite(),
        ConvergenceRadius::Exact(j) => (m.upper - j).abs() <= 1e-12 * j,
        ConvergenceRadius::Estimated(_) => false,
    };
    if !matches {
        return Err(Error::Unsupported(format!(
            "measure upper limit {} does not equal J* = {:?}",
            m.upper,
            w.j_star()
        )));
    }
    let report = moment_check(m, w, n_check)?;
    Ok(report.rows.iter().map(|r| r.moment / r.rho).collect())
}

/// γ-average of `|J,γ><J,γ|`; real symmetric in the energy basis.
#[derive(Debug, Clone)]
pub struct ProjectorMatrix {
    pub entries: DMatrix<f64>,
    pub j: f64,
    /// Averaging half-width Γ; `None` for the `Γ -> ∞` limit.
    pub window: Option<f64>,
}

impl ProjectorMatrix {
    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.entries.nrows();
        let mut best = 0.0_f64;
        for i in 0..n {
            for k in 0..n {
                if i != k {
                    best = best.max(self.entries[(i, k)].abs());
                }
            }
        }
        best
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.entries - self.entries.transpose()).abs().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone()).eigenvalues.min()
    }
}

/// `sin(π y)`, exact zero at integers.
fn sin_pi(y: f64) -> f64 {
    let r = y - 2.0 * (0.5 * y).round();
    let r = if r > 0.5 {
        1.0 - r
    } else if r < -0.5 {
        -1.0 - r
    } else {
        r
    };
    (std::f64::consts::PI * r).sin()
}

fn window_sinc(window: f64, gap: f64) -> f64 {
    if gap == 0.0 {
        return 1.0;
    }
    let y = (window / std::f64::consts::PI) * gap;
    sin_pi(y) / (std::f64::consts::PI * y)
}

/// `(2Γ)^-1 ∫_{-Γ}^{Γ} |J,γ><J,γ| dγ` restricted to `n, m <= n_max`, from the
/// closed-form average `sin(Γ Δ) / (Γ Δ)` of the phases `exp(-i Δ γ)`.
pub fn gamma_averaged_projector(
    s: &Spectrum,
    w: &WeightTable,
    j: f64,
    window: Option<f64>,
    n_max: usize,
) -> Result<ProjectorMatrix> {
    w.check_spectrum(s)?;
    if let Some(g) = window {
        if !(g > 0.0) {
            return Err(Error::InvalidParameter(format!("averaging window must be positive, got {g}")));
        }
    }
    if n_max > w.n_max() {
        return Err(Error::BeyondLevelList { index: n_max, last: w.n_max() });
    }
    let log_norm = normalization(w, j)?.value.ln();
    let amp: Vec<f64> = (0..=n_max)
        .map(|n| {
            if j == 0.0 {
                if n == 0 { 1.0 } else { 0.0 }
            } else {
                (0.5 * (n as f64 * j.ln() - w.log_rho()[n] - log_norm)).exp()
            }
        })
        .collect();
    let dim = n_max + 1;
    let entries = DMatrix::from_fn(dim, dim, |n, m| {
        let factor = match window {
            None => {
                if n == m { 1.0 } else { 0.0 }
            }
            Some(g) => window_sinc(g, w.level(n) - w.level(m)),
        };
        amp[n] * amp[m] * factor
    });
    Ok(ProjectorMatrix { entries, j, window })
}
