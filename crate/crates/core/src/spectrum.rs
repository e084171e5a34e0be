//! Discrete, nondegenerate energy spectra and their dimensionless levels.
//!
//! A [`Spectrum`] holds a rule for the dimensionless levels `e_n = E_n / omega`
//! with `e_0 = 0`. Builtin models are generated on demand; explicit level lists
//! are finite and refuse indices past their end.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Builtin spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `E_n = omega * n`.
    Harmonic,
    /// `E_n = omega * (1 - 1/(n+1)^2)`, with `omega = E*`.
    HydrogenLike,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Harmonic => "harmonic",
            Model::HydrogenLike => "hydrogen_like",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" => Ok(Model::Harmonic),
            "hydrogen_like" | "hydrogen" => Ok(Model::HydrogenLike),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

type LevelFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

#[derive(Clone)]
enum LevelRule {
    Builtin(Model),
    /// Dimensionless levels, already shifted so that the first is zero.
    Explicit(Vec<f64>),
    Custom(LevelFn),
}

impl fmt::Debug for LevelRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelRule::Builtin(m) => write!(f, "Builtin({})", m.name()),
            LevelRule::Explicit(levels) => write!(f, "Explicit({} levels)", levels.len()),
            LevelRule::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// An immutable discrete spectrum.
#[derive(Debug, Clone)]
pub struct Spectrum {
    name: String,
    omega: f64,
    rule: LevelRule,
    /// Limit of the dimensionless levels; `None` when unknown.
    e_star: Option<f64>,
    shift_applied: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub n: usize,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub shift_applied: f64,
}

fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("omega must be positive and finite, got {omega}")))
    }
}

impl Spectrum {
    pub fn builtin(model: Model, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        let e_star = match model {
            Model::Harmonic => f64::INFINITY,
            Model::HydrogenLike => 1.0,
        };
        Ok(Spectrum {
            name: model.name().to_string(),
            omega,
            rule: LevelRule::Builtin(model),
            e_star: Some(e_star),
            shift_applied: 0.0,
        })
    }

    /// Spectrum from a finite list of energies (energy units).
    ///
    /// The list is shifted so its first entry is zero and divided by `omega`.
    /// `e_star` refers to the dimensionless, shifted levels. No validation is
    /// performed here; see [`Spectrum::validate`] and [`load_spectrum`].
    pub fn explicit(
        name: impl Into<String>,
        omega: f64,
        energies: &[f64],
        e_star: Option<f64>,
    ) -> Result<Self> {
        check_omega(omega)?;
        let first = *energies
            .first()
            .ok_or_else(|| Error::InvalidParameter("explicit level list is empty".into()))?;
        if !first.is_finite() {
            return Err(Error::InvalidParameter("lowest level is not finite".into()));
        }
        let levels = energies.iter().map(|e| (e - first) / omega).collect();
        Ok(Spectrum {
            name: name.into(),
            omega,
            rule: LevelRule::Explicit(levels),
            e_star,
            shift_applied: first,
        })
    }

    /// Spectrum from a rule `n -> e_n` for the dimensionless levels.
    ///
    /// The rule must give `e_0 = 0`; it is not shifted.
    pub fn from_fn<F>(name: impl Into<String>, omega: f64, e_star: Option<f64>, levels: F) -> Result<Self>
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        check_omega(omega)?;
        Ok(Spectrum {
            name: name.into(),
            omega,
            rule: LevelRule::Custom(Arc::new(levels)),
            e_star,
            shift_applied: 0.0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn e_star(&self) -> Option<f64> {
        self.e_star
    }

    pub fn shift_applied(&self) -> f64 {
        self.shift_applied
    }

    pub fn model(&self) -> Option<Model> {
        match self.rule {
            LevelRule::Builtin(m) => Some(m),
            _ => None,
        }
    }

    /// Largest defined index, `None` for unbounded rules.
    pub fn last_index(&self) -> Option<usize> {
        match &self.rule {
            LevelRule::Explicit(levels) => Some(levels.len() - 1),
            _ => None,
        }
    }

    /// Same spectrum with a different scale. For explicit lists the stored
    /// dimensionless levels are rescaled so the energies stay fixed.
    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        let mut out = self.clone();
        if let LevelRule::Explicit(levels) = &mut out.rule {
            let ratio = self.omega / omega;
            levels.iter_mut().for_each(|e| *e *= ratio);
            out.e_star = self.e_star.map(|e| e * ratio);
        }
        out.omega = omega;
        Ok(out)
    }

    /// Dimensionless level `e_n`.
    pub fn level(&self, n: usize) -> Result<f64> {
        match &self.rule {
            LevelRule::Builtin(Model::Harmonic) => Ok(n as f64),
            LevelRule::Builtin(Model::HydrogenLike) => {
                let k = (n + 1) as f64;
                Ok(1.0 - 1.0 / (k * k))
            }
            LevelRule::Explicit(levels) => levels.get(n).copied().ok_or(Error::BeyondLevelList {
                index: n,
                last: levels.len() - 1,
            }),
            LevelRule::Custom(f) => Ok(f(n)),
        }
    }

    /// `ln e_n`, evaluated without cancellation where the rule allows it.
    pub fn ln_level(&self, n: usize) -> Result<f64> {
        match &self.rule {
            LevelRule::Builtin(Model::HydrogenLike) => {
                let k = (n + 1) as f64;
                Ok((-1.0 / (k * k)).ln_1p())
            }
            _ => Ok(self.level(n)?.ln()),
        }
    }

    /// Energy `E_n = omega * e_n` (after the ground-level shift).
    pub fn energy(&self, n: usize) -> Result<f64> {
        Ok(self.omega * self.level(n)?)
    }

    /// Levels `e_0 ..= e_n_max`.
    pub fn levels(&self, n_max: usize) -> Result<Vec<f64>> {
        (0..=n_max).map(|n| self.level(n)).collect()
    }

    /// Checks `e_0 = 0`, finiteness, strict monotonicity and `e_n < e_star`
    /// for every defined `n <= n_max`.
    pub fn validate(&self, n_max: usize) -> ValidationReport {
        let mut violations = Vec::new();
        let last = self.last_index().map_or(n_max, |l| l.min(n_max));
        let mut prev: Option<f64> = None;
        for n in 0..=last {
            let e = match self.level(n) {
                Ok(e) => e,
                Err(err) => {
                    violations.push(Violation { n, description: err.to_string() });
                    break;
                }
            };
            if !e.is_finite() {
                violations.push(Violation { n, description: format!("level is not finite ({e})") });
                prev = None;
                continue;
            }
            if n == 0 && e != 0.0 {
                violations.push(Violation { n, description: format!("ground level is {e}, expected 0") });
            }
            if let Some(p) = prev {
                if e == p {
                    violations.push(Violation { n, description: format!("degenerate with level {} ({e})", n - 1) });
                } else if e < p {
                    violations.push(Violation {
                        n,
                        description: format!("decreasing: e_{n} = {e} < e_{} = {p}", n - 1),
                    });
                }
            }
            if let Some(star) = self.e_star {
                if star.is_finite() && e >= star {
                    violations.push(Violation { n, description: format!("level {e} is not below e_star = {star}") });
                }
            }
            prev = Some(e);
        }
        ValidationReport {
            ok: violations.is_empty(),
            violations,
            shift_applied: self.shift_applied,
        }
    }

    /// Identity used to check that states and weight tables share a basis.
    pub fn tag(&self) -> String {
        format!("{}@{}", self.name, self.omega)
    }
}

/// Structured spectrum document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumDocument {
    #[serde(default)]
    pub name: Option<String>,
    pub omega: f64,
    pub kind: DocumentKind,
    #[serde(default)]
    pub model: Option<Model>,
    #[serde(default)]
    pub levels: Option<Vec<f64>>,
    #[serde(default)]
    pub e_star: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    Builtin,
    Explicit,
}

impl SpectrumDocument {
    pub fn into_spectrum(self) -> Result<Spectrum> {
        let spectrum = match self.kind {
            DocumentKind::Builtin => {
                let model = self
                    .model
                    .ok_or_else(|| Error::InvalidParameter("builtin document needs a 'model'".into()))?;
                let mut s = Spectrum::builtin(model, self.omega)?;
                if let Some(name) = self.name {
                    s.name = name;
                }
                s
            }
            DocumentKind::Explicit => {
                let levels = self
                    .levels
                    .ok_or_else(|| Error::InvalidParameter("explicit document needs 'levels'".into()))?;
                let name = self.name.unwrap_or_else(|| "explicit".into());
                Spectrum::explicit(name, self.omega, &levels, self.e_star)?
            }
        };
        let n_check = spectrum.last_index().unwrap_or(1000);
        let report = spectrum.validate(n_check);
        if !report.ok {
            return Err(Error::Validation(report));
        }
        Ok(spectrum)
    }
}

/// Parses and validates a spectrum document.
pub fn load_spectrum(document: &str) -> Result<Spectrum> {
    let doc: SpectrumDocument = serde_json::from_str(document)?;
    doc.into_spectrum()
}
