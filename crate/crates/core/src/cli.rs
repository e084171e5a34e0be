//! Command-line front end.
//!
//! Every command produces a [`Report`]: a few metadata entries plus a table.
//! CSV output writes the table with a header row and sends the metadata to
//! stderr; JSON output writes both as one document.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use crate::dynamics::{kinematic_representation_check, temporal_stability_residual};
use crate::error::{Error, Result};
use crate::observables::{
    hydrogen_variance_bound, near_j_star_exponent, small_j_slope, variance_curve, variance_with,
};
use crate::resolution::{builtin_measure, gamma_averaged_projector, load_measure, moment_check, unity_check, Measure};
use crate::spectrum::{load_spectrum, Model, Spectrum};
use crate::state::{coefficients, coefficients_through, continuity_probe, norm_deficit, StateLabel};
use crate::weights::{
    compute_weights, normalization_with, ConvergenceRadius, SeriesOptions, WeightTable, DEFAULT_EDGE_EPS,
    DEFAULT_N_MAX, DEFAULT_TAIL_TOL,
};

pub const DEFAULT_SEED: u64 = 0x5eed_c0de;
pub const MIN_N_MAX: usize = 8;

/// Table size used by the checks that probe `J` close to `J* = 1`.
pub const DEEP_N_MAX: usize = 200_000;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gkcs", version, about = "Temporally stable coherent states for discrete spectra")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Builtin spectrum.
    #[arg(long, global = true, conflicts_with = "file")]
    pub model: Option<Model>,
    /// Spectrum document (JSON).
    #[arg(long, global = true)]
    pub file: Option<PathBuf>,
    /// Energy scale, overriding the model or document value.
    #[arg(long, global = true)]
    pub omega: Option<f64>,
    #[arg(long, global = true, default_value_t = DEFAULT_TAIL_TOL)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_N_MAX)]
    pub nmax: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Levels e_n, E_n = omega e_n and the validation report.
    Spectrum {
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Weights rho_n and the radius of convergence.
    Weights {
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Coherent-state amplitudes at (J, γ).
    State {
        #[arg(long)]
        j: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        gamma: f64,
    },
    /// Mean energy and variance over a grid of J.
    Variance {
        /// `start:stop:step` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "")]
        grid: String,
    },
    /// Residual between the evolved state and the state at the evolved label.
    Evolve {
        #[arg(long)]
        j: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
    },
    /// Run every invariant check that applies to the spectrum.
    Verify {
        /// Measure document; builtin models default to their own measure.
        #[arg(long)]
        measure: Option<PathBuf>,
    },
    /// Measure moments against rho_n and the resolution-of-unity diagonal.
    Resolution {
        #[arg(long, default_value_t = 15)]
        count: usize,
        #[arg(long)]
        measure: Option<PathBuf>,
    },
}

/// Resolved global settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spectrum: Spectrum,
    pub opts: SeriesOptions,
    pub n_max: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_args(g: &GlobalArgs) -> Result<Self> {
        if !(g.tol > 0.0 && g.tol < 1.0) {
            return Err(Error::InvalidParameter(format!("--tol must lie in (0, 1), got {}", g.tol)));
        }
        if g.nmax < MIN_N_MAX {
            return Err(Error::InvalidParameter(format!("--nmax must be at least {MIN_N_MAX}, got {}", g.nmax)));
        }
        let mut spectrum = match &g.file {
            Some(path) => load_spectrum(&std::fs::read_to_string(path)?)?,
            None => Spectrum::builtin(g.model.unwrap_or(Model::HydrogenLike), 1.0)?,
        };
        if let Some(omega) = g.omega {
            spectrum = spectrum.with_omega(omega)?;
        }
        let n_max = spectrum.last_index().map_or(g.nmax, |last| last.min(g.nmax));
        Ok(RunConfig {
            spectrum,
            opts: SeriesOptions { tail_tol: g.tol, edge_eps: DEFAULT_EDGE_EPS },
            n_max,
            format: g.format,
            out: g.out.clone(),
            seed: g.seed,
        })
    }

    fn weights(&self) -> Result<WeightTable> {
        compute_weights(&self.spectrum, self.n_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format_number(*x),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => Value::from(*i),
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

/// Seventeen significant digits, `.` as decimal separator.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub meta: Vec<(String, Cell)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    fn new(columns: &[&'static str]) -> Self {
        Report { meta: Vec::new(), columns: columns.to_vec(), rows: Vec::new() }
    }

    fn meta(&mut self, key: &str, value: impl Into<Cell>) {
        self.meta.push((key.to_string(), value.into()));
    }

    fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn meta_lines(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {}", v.csv());
        }
        s
    }

    pub fn to_json(&self) -> Value {
        let meta: Map<String, Value> = self.meta.iter().map(|(k, v)| (k.clone(), v.json())).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> =
                    self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                Value::Object(obj)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("columns".into(), Value::from(self.columns.clone()));
        doc.insert("meta".into(), Value::Object(meta));
        doc.insert("rows".into(), Value::Array(rows));
        Value::Object(doc)
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::TailNotReached { .. }
        | Error::VarianceDisagreement { .. }
        | Error::Quadrature(_)
        | Error::InsufficientPoints { .. }
        | Error::Extrapolation(_) => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

/// Parses `start:stop:step` (inclusive of `stop`) or `a,b,c`; empty gives an
/// empty grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidParameter(format!("bad grid value '{t}'")))
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidParameter(format!("grid '{spec}' is not start:stop:step")));
        }
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("grid '{spec}' needs step > 0 and stop >= start")));
        }
        let count = ((b - a) / h * (1.0 + 1e-12) + 1e-9).floor() as usize;
        Ok((0..=count).map(|k| a + k as f64 * h).collect())
    } else {
        spec.split(',').map(num).collect()
    }
}

/// Parses `args`, runs the command and writes the result; returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok((report, code)) => match emit(&report, &cli.global, stdout, stderr) {
            Ok(()) => code,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_INPUT
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main_with_env() -> i32 {
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    run_with(std::env::args_os(), &mut stdout, &mut stderr)
}

fn emit(report: &Report, g: &GlobalArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let body = match g.format {
        Format::Csv => {
            stderr.write_all(report.meta_lines().as_bytes())?;
            report.to_csv()
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.to_json())?;
            s.push('\n');
            s
        }
    };
    match &g.out {
        Some(path) => std::fs::write(path, body)?,
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

/// Runs the parsed command; the exit code is nonzero only for failed checks.
pub fn execute(cli: &Cli) -> Result<(Report, i32)> {
    let config = RunConfig::from_args(&cli.global)?;
    match &cli.command {
        Command::Spectrum { count } => cmd_spectrum(&config, *count).map(|r| (r, EXIT_OK)),
        Command::Weights { count } => cmd_weights(&config, *count).map(|r| (r, EXIT_OK)),
        Command::State { j, gamma } => cmd_state(&config, *j, *gamma).map(|r| (r, EXIT_OK)),
        Command::Variance { grid } => cmd_variance(&config, &parse_grid(grid)?).map(|r| (r, EXIT_OK)),
        Command::Evolve { j, gamma, t } => cmd_evolve(&config, *j, *gamma, *t).map(|r| (r, EXIT_OK)),
        Command::Verify { measure } => {
            let measure = measure.as_ref().map(read_measure).transpose()?;
            let report = cmd_verify(&config, measure.as_ref())?;
            let failed = report.rows.iter().any(|row| row[1] == Cell::from("fail"));
            Ok((report, if failed { EXIT_VERIFY } else { EXIT_OK }))
        }
        Command::Resolution { count, measure } => {
            let measure = measure.as_ref().map(read_measure).transpose()?;
            cmd_resolution(&config, *count, measure.as_ref()).map(|r| (r, EXIT_OK))
        }
    }
}

fn read_measure(path: &PathBuf) -> Result<Measure> {
    load_measure(&std::fs::read_to_string(path)?)
}

fn spectrum_meta(report: &mut Report, s: &Spectrum) {
    report.meta("spectrum", s.name());
    report.meta("omega", s.omega());
    report.meta("e_star", s.e_star());
    report.meta("E_star", s.e_star().map(|e| e * s.omega()));
}

pub fn cmd_spectrum(config: &RunConfig, count: usize) -> Result<Report> {
    let s = &config.spectrum;
    let count = s.last_index().map_or(count, |last| count.min(last + 1));
    let mut report = Report::new(&["n", "e", "E"]);
    spectrum_meta(&mut report, s);
    report.meta("shift_applied", s.shift_applied());
    if count > 0 {
        let validation = s.validate(count - 1);
        if !validation.ok {
            return Err(Error::Validation(validation));
        }
    }
    report.meta("valid", "true");
    for n in 0..count {
        report.row(vec![n.into(), s.level(n)?.into(), s.energy(n)?.into()]);
    }
    Ok(report)
}

fn radius_meta(report: &mut Report, w: &WeightTable) {
    let (kind, value) = match w.j_star() {
        ConvergenceRadius::Infinite => ("infinite", f64::INFINITY),
        ConvergenceRadius::Exact(j) => ("exact", j),
        ConvergenceRadius::Estimated(j) => ("estimated", j),
    };
    report.meta("j_star", if value.is_finite() { Cell::Num(value) } else { Cell::from("inf") });
    report.meta("j_star_kind", kind);
}

pub fn cmd_weights(config: &RunConfig, count: usize) -> Result<Report> {
    let w = config.weights()?;
    let mut report = Report::new(&["n", "e", "log_rho", "rho"]);
    spectrum_meta(&mut report, &config.spectrum);
    radius_meta(&mut report, &w);
    report.meta("n_max", w.n_max());
    for n in 0..count.min(w.n_max() + 1) {
        report.row(vec![n.into(), w.level(n).into(), w.log_rho()[n].into(), w.rho(n).into()]);
    }
    Ok(report)
}

pub fn cmd_state(config: &RunConfig, j: f64, gamma: f64) -> Result<Report> {
    let w = config.weights()?;
    let x = coefficients(&config.spectrum, &w, StateLabel::new(j, gamma), config.opts.tail_tol)?;
    let mut report = Report::new(&["n", "re", "im", "probability"]);
    report.meta("J", j);
    report.meta("gamma", gamma);
    report.meta("terms", x.len());
    report.meta("tail_mass_bound", x.tail_mass_bound);
    report.meta("norm_deficit", norm_deficit(&x));
    for (n, c) in x.c.iter().enumerate() {
        report.row(vec![n.into(), c.re.into(), c.im.into(), c.norm_sqr().into()]);
    }
    Ok(report)
}

pub fn cmd_variance(config: &RunConfig, grid: &[f64]) -> Result<Report> {
    let s = &config.spectrum;
    let w = config.weights()?;
    let hydrogen = s.model() == Some(Model::HydrogenLike);
    let mut report = Report::new(&["J", "mean", "variance", "bound", "tail_bound", "error"]);
    spectrum_meta(&mut report, s);
    for entry in variance_curve(s, &w, grid, &config.opts) {
        let bound = if hydrogen { Cell::Num(hydrogen_variance_bound(s.omega(), entry.j)) } else { Cell::Empty };
        let row = match entry.result {
            Ok(p) => vec![p.j.into(), p.mean.into(), p.variance.into(), bound, p.tail_bound.into(), Cell::Empty],
            Err(e) => vec![entry.j.into(), Cell::Empty, Cell::Empty, bound, Cell::Empty, e.to_string().into()],
        };
        report.row(row);
    }
    Ok(report)
}

pub fn cmd_evolve(config: &RunConfig, j: f64, gamma: f64, t: f64) -> Result<Report> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite, got {t}")));
    }
    let w = config.weights()?;
    let r = temporal_stability_residual(&config.spectrum, &w, StateLabel::new(j, gamma), t, config.opts.tail_tol)?;
    let mut report = Report::new(&["J", "gamma", "t", "evolved_gamma", "residual", "tail_bound", "terms"]);
    spectrum_meta(&mut report, &config.spectrum);
    report.row(vec![
        j.into(),
        gamma.into(),
        t.into(),
        r.evolved_label.gamma.into(),
        r.residual.into(),
        r.tail_bound.into(),
        r.terms_used.into(),
    ]);
    Ok(report)
}

fn measure_for(config: &RunConfig, given: Option<&Measure>) -> Option<Measure> {
    given.cloned().or_else(|| config.spectrum.model().map(builtin_measure))
}

fn default_moment_count(m: &Measure) -> usize {
    if m.upper().is_infinite() {
        15
    } else {
        30
    }
}

pub fn cmd_resolution(config: &RunConfig, count: usize, measure: Option<&Measure>) -> Result<Report> {
    let m = measure_for(config, measure).ok_or_else(|| {
        Error::InvalidParameter("no measure: pass --measure for spectra without a builtin model".into())
    })?;
    let w = config.weights()?;
    let moments = moment_check(&m, &w, count)?;
    let diagonal = unity_check(&m, &w, &config.spectrum, count);
    let mut report = Report::new(&["n", "rho", "moment", "rel_error", "diagonal"]);
    radius_meta(&mut report, &w);
    report.meta("upper", if m.upper().is_finite() { Cell::Num(m.upper()) } else { Cell::from("inf") });
    report.meta("max_rel_error", moments.max_rel_error);
    if let Err(e) = &diagonal {
        report.meta("diagonal", e.to_string());
    }
    for (k, row) in moments.rows.iter().enumerate() {
        let d = diagonal.as_ref().ok().map(|d| d[k]);
        report.row(vec![row.n.into(), row.rho.into(), row.moment.into(), row.rel_error.into(), d.into()]);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone)]
struct Check {
    name: &'static str,
    status: Status,
    value: Option<f64>,
    threshold: Option<f64>,
    detail: String,
}

impl Check {
    fn compare(name: &'static str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        let status = if value <= threshold { Status::Pass } else { Status::Fail };
        Check { name, status, value: Some(value), threshold: Some(threshold), detail: detail.into() }
    }

    fn skipped(name: &'static str, why: &str) -> Self {
        Check { name, status: Status::Skipped, value: None, threshold: None, detail: why.into() }
    }

    fn failed(name: &'static str, e: &Error) -> Self {
        Check { name, status: Status::Fail, value: None, threshold: None, detail: e.to_string() }
    }

    fn from_result(name: &'static str, r: Result<Check>) -> Self {
        r.unwrap_or_else(|e| Check::failed(name, &e))
    }
}

/// Upper end of the sampled label range: `0.95 min(J*, 10)`.
fn label_ceiling(w: &WeightTable) -> f64 {
    0.95 * w.j_star().value().min(10.0)
}

fn sample_label(rng: &mut ChaCha8Rng, top: f64) -> StateLabel {
    StateLabel::new(rng.gen_range(0.0..top), rng.gen_range(-PI..PI))
}

pub fn cmd_verify(config: &RunConfig, measure: Option<&Measure>) -> Result<Report> {
    let s = &config.spectrum;
    let w = config.weights()?;
    let opts = &config.opts;
    let tol = opts.tail_tol;
    let model = s.model();
    let top = label_ceiling(&w);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut checks = Vec::new();

    let grid: Vec<f64> = (0..20).map(|k| top * k as f64 / 19.0).collect();
    checks.push(Check::from_result("action_identity", (|| {
        let mut worst = 0.0_f64;
        for &j in &grid {
            let mean = crate::observables::energy_mean_with(s, &w, j, opts)?;
            worst = worst.max((mean / s.omega() - j).abs());
        }
        Ok(Check::compare("action_identity", worst, 1e-8, format!("20 points on [0, {top}]")))
    })()));

    checks.push(Check::from_result("variance_routes", (|| {
        let mut worst = 0.0_f64;
        for &j in &grid {
            let p = variance_with(s, &w, j, opts)?;
            let scale = p.variance.abs().max(p.pair_sum_variance.abs());
            if scale > 0.0 {
                worst = worst.max((p.variance - p.pair_sum_variance).abs() / scale);
            }
        }
        Ok(Check::compare("variance_routes", worst, 1e-8, "moments vs pair sum, relative"))
    })()));

    checks.push(match model {
        None => Check::skipped("normalization_closed_form", "no closed form for this spectrum"),
        Some(model) => Check::from_result("normalization_closed_form", (|| {
            let mut worst = 0.0_f64;
            for k in 1..=9 {
                let j = k as f64 / 10.0;
                let exact = match model {
                    Model::Harmonic => j.exp(),
                    Model::HydrogenLike => 2.0 / (1.0 - j) + 2.0 / (j * j) * (j + (-j).ln_1p()),
                };
                let series = normalization_with(&w, j, opts)?.value;
                worst = worst.max((series / exact - 1.0).abs());
            }
            Ok(Check::compare("normalization_closed_form", worst, 1e-10, "J = 0.1 .. 0.9, relative"))
        })()),
    });

    checks.push(if model == Some(Model::Harmonic) {
        Check::from_result("harmonic_reduction", harmonic_reduction(s, &w, &mut rng, tol))
    } else {
        Check::skipped("harmonic_reduction", "harmonic model only")
    });

    checks.push(Check::from_result("temporal_stability", (|| {
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let label = sample_label(&mut rng, top);
            let t = rng.gen_range(-50.0..50.0);
            worst = worst.max(temporal_stability_residual(s, &w, label, t, tol)?.residual);
        }
        Ok(Check::compare("temporal_stability", worst, 1e-10, "100 random (J, gamma, t)"))
    })()));

    checks.push(Check::from_result("kinematics", (|| {
        let dim = 40.min(w.n_max() + 1);
        let mut worst = 0.0_f64;
        for _ in 0..50 {
            let mut psi: Vec<Complex64> =
                (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            psi.iter_mut().for_each(|z| *z /= norm);
            let label = sample_label(&mut rng, top);
            let t = rng.gen_range(-50.0..50.0);
            let (lhs, rhs) = kinematic_representation_check(s, &w, &psi, label, t, tol)?;
            worst = worst.max((lhs - rhs).norm());
        }
        Ok(Check::compare("kinematics", worst, 1e-10, format!("50 random psi with {dim} components")))
    })()));

    match measure_for(config, measure) {
        None => {
            checks.push(Check::skipped("measure_moments", "no measure supplied"));
            checks.push(Check::skipped("unity_diagonal", "no measure supplied"));
        }
        Some(m) => {
            let n_check = default_moment_count(&m).min(w.n_max());
            checks.push(Check::from_result("measure_moments", (|| {
                let report = moment_check(&m, &w, n_check)?;
                Ok(Check::compare("measure_moments", report.max_rel_error, 1e-9, format!("n <= {n_check}")))
            })()));
            checks.push(Check::from_result("unity_diagonal", (|| {
                let d = unity_check(&m, &w, s, n_check)?;
                let worst = d.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
                Ok(Check::compare("unity_diagonal", worst, 1e-9, format!("n <= {n_check}")))
            })()));
        }
    }

    checks.push(Check::from_result("small_j_slope", (|| {
        let est = small_j_slope(s, &w, opts)?;
        let e1 = w.level(1);
        Ok(Check::compare("small_j_slope", (est.slope / e1 - 1.0).abs(), 1e-4, format!("slope {} vs e_1 {e1}", est.slope)))
    })()));

    let j_mid = 0.5 * w.j_star().value().min(1.0);
    let n_proj = 60.min(w.n_max());
    checks.push(Check::from_result("projector_trace", (|| {
        let p = gamma_averaged_projector(s, &w, j_mid, None, n_proj)?;
        Ok(Check::compare("projector_trace", (p.trace() - 1.0).abs(), 1e-10, format!("J = {j_mid}")))
    })()));

    if model == Some(Model::HydrogenLike) {
        checks.push(Check::from_result("projector_decay", (|| {
            let mut off = Vec::new();
            for g in [1e2, 1e3, 1e4] {
                off.push(gamma_averaged_projector(s, &w, j_mid, Some(g), n_proj)?.max_off_diagonal());
            }
            let ratio = (off[0] / off[1]).min(off[1] / off[2]);
            let mut c = Check::compare("projector_decay", -ratio, -8.0, format!("off-diagonal maxima {off:?}"));
            c.value = Some(ratio);
            c.threshold = Some(8.0);
            Ok(c)
        })()));
    } else {
        checks.push(Check::skipped("projector_decay", "hydrogen-like model only"));
    }

    checks.push(Check::from_result("label_continuity", (|| {
        let mut worst = 0.0_f64;
        for _ in 0..5 {
            let label = StateLabel::new(rng.gen_range(0.05 * top..0.9 * top), rng.gen_range(-PI..PI));
            worst = worst.max(continuity_probe(s, &w, label, &[1e-3, 1e-4, 1e-5], tol)?.constant);
        }
        let status = if worst.is_finite() { Status::Pass } else { Status::Fail };
        Ok(Check { name: "label_continuity", status, value: Some(worst), threshold: None, detail: "5 random labels".into() })
    })()));

    if model == Some(Model::HydrogenLike) {
        let deep = compute_weights(s, DEEP_N_MAX.max(config.n_max))?;
        checks.push(Check::from_result("variance_bound", (|| {
            let mut worst = f64::NEG_INFINITY;
            for k in 1..=9 {
                let j = k as f64 / 10.0;
                let v = variance_with(s, &deep, j, opts)?.variance;
                worst = worst.max(v - hydrogen_variance_bound(s.omega(), j));
            }
            let near = variance_with(s, &deep, 0.999, opts)?.variance;
            let mid = variance_with(s, &deep, 0.5, opts)?.variance;
            let mut c = Check::compare("variance_bound", worst, 1e-9, format!("v(0.999) = {near}, v(0.5) = {mid}"));
            if near >= mid {
                c.status = Status::Fail;
            }
            Ok(c)
        })()));
        checks.push(Check::from_result("near_j_star_exponent", (|| {
            let fit = near_j_star_exponent(s, &deep, None, opts)?;
            let mut c = Check::compare("near_j_star_exponent", (fit.exponent - 1.0).abs(), 0.1, format!("exponent {}", fit.exponent));
            c.value = Some(fit.exponent);
            Ok(c)
        })()));
    } else {
        checks.push(Check::skipped("variance_bound", "hydrogen-like model only"));
        checks.push(Check::skipped("near_j_star_exponent", "hydrogen-like model only"));
    }

    let mut report = Report::new(&["check", "status", "value", "threshold", "detail"]);
    spectrum_meta(&mut report, s);
    report.meta("seed", Cell::Int(config.seed));
    let mut failed = 0;
    for c in checks {
        let status = match c.status {
            Status::Pass => "pass",
            Status::Fail => {
                failed += 1;
                "fail"
            }
            Status::Skipped => "skipped",
        };
        report.row(vec![c.name.into(), status.into(), c.value.into(), c.threshold.into(), c.detail.into()]);
    }
    report.meta("failed", failed as usize);
    Ok(report)
}

/// Largest deviation from `e^{-J/2} z^n / sqrt(n!)`, `z = sqrt(J) e^{-iγ}`,
/// over `n <= 60` and ten random labels.
fn harmonic_reduction(s: &Spectrum, w: &WeightTable, rng: &mut ChaCha8Rng, tol: f64) -> Result<Check> {
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let label = StateLabel::new(rng.gen_range(0.0..5.0), rng.gen_range(-PI..PI));
        let x = coefficients_through(s, w, label, tol, 60)?;
        let mut ln_fact = 0.0;
        for n in 0..=60usize {
            if n > 0 {
                ln_fact += (n as f64).ln();
            }
            let expected = if label.j == 0.0 {
                if n == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
            } else {
                let modulus = (-0.5 * label.j + 0.5 * n as f64 * label.j.ln() - 0.5 * ln_fact).exp();
                Complex64::from_polar(modulus, -(n as f64) * label.gamma)
            };
            let got = x.c.get(n).copied().unwrap_or_default();
            worst = worst.max((got - expected).norm());
        }
    }
    Ok(Check::compare("harmonic_reduction", worst, 1e-12, "n <= 60, 10 random labels"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert!(parse_grid("").unwrap().is_empty());
        assert_eq!(parse_grid("0.1:0.9:0.1").unwrap().len(), 9);
        assert_eq!(parse_grid("1").unwrap(), vec![1.0]);
        assert_eq!(parse_grid("0.2, 0.4").unwrap(), vec![0.2, 0.4]);
        assert_eq!(parse_grid("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn number_format_is_fixed() {
        assert_eq!(format_number(0.75), "7.5000000000000000e-1");
        assert_eq!(format_number(1.0 / 3.0), "3.3333333333333331e-1");
        let x = 0.1 + 0.2;
        assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_quotes_text() {
        assert_eq!(Cell::from("a, b").csv(), "\"a, b\"");
        assert_eq!(Cell::Empty.csv(), "");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::OutOfRange { j: 2.0, limit: 1.0 }), EXIT_INPUT);
        assert_eq!(exit_code(&Error::TailNotReached { partial: 1.0, tail_bound: 1.0, terms: 3 }), EXIT_NUMERICAL);
    }

    #[test]
    fn small_nmax_rejected() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(["gkcs", "--nmax", "4", "spectrum"], &mut out, &mut err);
        assert_eq!(code, EXIT_INPUT);
    }
}
