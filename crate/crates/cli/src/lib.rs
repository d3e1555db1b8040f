//! Config-driven driver for the interpolation, oracle and minimax workflows.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use gmi_core::classical::{interpolate, Interpolation};
use gmi_core::increments::{
    classify_stationarity, expand_operator, frequency_set, gm_series, inverse_series, SeriesSign,
};
use gmi_core::minimax::{solve_minimax, MinimaxResult};
use gmi_core::oracle::{convergence_table, ConvergenceRow};
use gmi_core::spectra::{DensityGrid, DensityModel, FrequencyGrid};
use gmi_core::{ErrorKind, GmiError, Result};
use serde::{Deserialize, Serialize};

pub use config::{IncrementConfig, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Interpolate,
    OracleVerify,
    Minimax,
    Classify,
    Coeffs,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Interpolate => "interpolate",
            Command::OracleVerify => "oracle-verify",
            Command::Minimax => "minimax",
            Command::Classify => "classify",
            Command::Coeffs => "coeffs",
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub classical_delta: f64,
    pub tolerance: f64,
    pub rows: Vec<ConvergenceRow>,
    pub monotone: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffsReport {
    pub n_gamma: Option<usize>,
    /// Operator coefficients `e(0..=n_gamma)` of the integer-order part.
    pub e: Option<Vec<i128>>,
    /// Inverse series `d(0..=length)`.
    pub d_mu: Option<Vec<i128>>,
    pub g_plus: Option<Vec<f64>>,
    pub g_minus: Option<Vec<f64>>,
}

/// What a command produced: files written and a one-line summary.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// Set when the run finished but a verification check failed.
    pub failure: Option<GmiError>,
}

pub fn exit_code(err: &GmiError) -> i32 {
    match err.kind() {
        ErrorKind::Validation => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Verification => 4,
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorEnvelope<'a> {
    error: ErrorBody<'a>,
}

pub fn error_envelope(err: &GmiError) -> String {
    output::to_json_line(&ErrorEnvelope { error: ErrorBody { code: err.code(), message: err.to_string() } })
}

struct Problem {
    spec: gmi_core::GMIncrementSpec,
    grid: FrequencyGrid,
    f: DensityGrid,
    g: DensityGrid,
    fspec: gmi_core::FunctionalSpec,
}

fn problem(cfg: &RunConfig) -> Result<Problem> {
    let spec = cfg.increment.gm()?;
    let grid = FrequencyGrid::new(cfg.grid)?;
    let fspec = cfg.require_functional()?;
    let signal = cfg
        .signal
        .clone()
        .ok_or_else(|| GmiError::InvalidInput("config lacks a signal density".into()))?;
    // a fractional increment turns the signal model into the bounded base density
    let signal = match &cfg.increment {
        IncrementConfig::Fm(fm) => DensityModel::Fractional { spec: fm.clone(), base: Box::new(signal) },
        IncrementConfig::Gm(_) => signal,
    };
    let f = signal.evaluate(&grid, Some(&spec))?;
    let g = match &cfg.noise {
        Some(m) => m.evaluate(&grid, Some(&spec))?,
        None => DensityGrid::zeros(f.dim(), grid.len()),
    };
    Ok(Problem { spec, grid, f, g, fspec })
}

fn run_interpolate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let p = problem(cfg)?;
    let Interpolation { solution, characteristic } = interpolate(&p.spec, &p.f, &p.g, &p.fspec, &p.grid)?;
    output::write_json(out, "solution.json", &solution)?;
    let csv = out.join("characteristic.csv");
    characteristic.write_csv(&p.grid, std::fs::File::create(&csv)?)?;
    Ok(Outcome {
        files: vec![out.join("solution.json"), csv],
        summary: format!("delta = {:.16e}", solution.delta),
        failure: None,
    })
}

fn run_oracle(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let p = problem(cfg)?;
    let classical = interpolate(&p.spec, &p.f, &p.g, &p.fspec, &p.grid)?.solution.delta;
    let rows = convergence_table(&p.spec, &p.f, &p.g, &p.fspec, &p.grid, &cfg.oracle.schedule, classical)?;
    let monotone = rows.windows(2).all(|w| w[1].delta <= w[0].delta * (1.0 + 1e-12) + 1e-15);
    let last = rows.last().expect("schedule validated non-empty");
    let passed = monotone && last.rel_gap <= cfg.oracle.tolerance;
    let report = OracleReport { classical_delta: classical, tolerance: cfg.oracle.tolerance, rows: rows.clone(), monotone, passed };
    output::write_json(out, "oracle.json", &report)?;
    let failure = (!passed).then(|| {
        GmiError::Verification(format!(
            "oracle gap {:.3e} at L = {} (tolerance {:e}, monotone {monotone})",
            last.rel_gap, last.half_length, cfg.oracle.tolerance
        ))
    });
    Ok(Outcome {
        files: vec![out.join("oracle.json")],
        summary: format!("classical delta = {classical:.16e}, gap at L = {}: {:.3e}", last.half_length, last.rel_gap),
        failure,
    })
}

fn run_minimax(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let mm = cfg
        .minimax
        .as_ref()
        .ok_or_else(|| GmiError::InvalidInput("config lacks a minimax section".into()))?;
    let spec = cfg.increment.gm()?;
    let grid = FrequencyGrid::new(cfg.grid)?;
    let fspec = cfg.require_functional()?;
    let mut options = mm.options;
    options.seed = cfg.seed;
    let r: MinimaxResult = solve_minimax(&mm.class, &fspec, &spec, &grid, &options)?;
    output::write_json(out, "minimax.json", &r)?;
    let failure = if !r.converged {
        Some(GmiError::Verification(format!("ascent did not converge (gap {:e})", r.gap)))
    } else if !r.saddle_report.passed {
        Some(GmiError::Verification(format!(
            "saddle check failed (relative violation {:e})",
            r.saddle_report.relative_violation
        )))
    } else {
        None
    };
    Ok(Outcome {
        files: vec![out.join("minimax.json")],
        summary: format!("{}: delta0 = {:.16e} after {} iterations", r.class_id, r.delta0, r.iterations),
        failure,
    })
}

fn run_classify(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let IncrementConfig::Fm(fm) = &cfg.increment else {
        return Err(GmiError::InvalidInput("classify needs a fractional (fm) increment".into()));
    };
    let report = classify_stationarity(fm);
    output::write_json(out, "classify.json", &report)?;
    let conditions: Vec<String> = report
        .per_nu
        .iter()
        .map(|r| format!("{} [{}]", r.condition, if r.stationary { "pass" } else { "fail" }))
        .collect();
    Ok(Outcome {
        files: vec![out.join("classify.json")],
        summary: format!(
            "stationary = {}, long_memory = {}, invertible = {}; {}",
            report.stationary,
            report.long_memory,
            report.invertible,
            conditions.join(", ")
        ),
        failure: None,
    })
}

fn run_coeffs(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let len = cfg.coeffs.length;
    let gm = match cfg.increment.gm() {
        Ok(s) => Some(s),
        Err(GmiError::DegenerateOperator) => None,
        Err(e) => return Err(e),
    };
    let mut report = CoeffsReport { n_gamma: None, e: None, d_mu: None, g_plus: None, g_minus: None };
    if let Some(spec) = &gm {
        report.n_gamma = Some(spec.n_gamma());
        report.e = Some(expand_operator(spec)?);
        report.d_mu = Some(inverse_series(spec, len)?);
    }
    if let IncrementConfig::Fm(fm) = &cfg.increment {
        let fset = frequency_set(fm);
        report.g_plus = Some(gm_series(&fset, SeriesSign::Plus, len)?);
        report.g_minus = Some(gm_series(&fset, SeriesSign::Minus, len)?);
    }
    output::write_json(out, "coeffs.json", &report)?;
    let summary = match &report.e {
        Some(e) => format!("n_gamma = {}, e = {e:?}", e.len() - 1),
        None => format!("fractional series to index {len}"),
    };
    Ok(Outcome { files: vec![out.join("coeffs.json")], summary, failure: None })
}

/// Runs one command; artifacts go to `out`, which is created if missing.
pub fn run(command: Command, mut cfg: RunConfig, overrides: &Overrides, out: &Path) -> Result<Outcome> {
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(grid) = overrides.grid {
        config::validate_grid(grid)?;
        cfg.grid = grid;
    }
    std::fs::create_dir_all(out)?;
    match command {
        Command::Interpolate => run_interpolate(&cfg, out),
        Command::OracleVerify => run_oracle(&cfg, out),
        Command::Minimax => run_minimax(&cfg, out),
        Command::Classify => run_classify(&cfg, out),
        Command::Coeffs => run_coeffs(&cfg, out),
    }
}
