//! Experiment orchestration: configuration, the named pipelines, reports,
//! CSV series and log-log plots.

mod config;
mod plot;
mod runs;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{
    ConductivityConfig, ExperimentsConfig, FrechetConfig, GeometryConfig, IdentityConfig, Lambda1Config, NonlinearityConfig,
    ProbeConfig, RecoverAprimeConfig, RecoverSigmaConfig, RunConfig, ScalingConfig, SolverConfig, StabilityConfig, SweepConfig,
    Thresholds,
};
pub use plot::{render_manifest, PlotSpec};
pub use runs::{run_experiment, EXPERIMENTS};

/// Least-squares fit of `log y = slope · log x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidInput(format!("slope fit needs ≥ 3 paired points (got {} and {})", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("slope fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("slope fit needs at least two distinct x values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit { slope, intercept: my - slope * mx, r_squared })
}

/// One pass/fail comparison against a configured threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub requirement: String,
    pub passed: bool,
}

fn short(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, requirement: format!("≤ {}", short(limit)), passed: value <= limit }
    }

    pub fn within(name: &str, value: f64, range: [f64; 2]) -> Self {
        Check {
            name: name.into(),
            value,
            requirement: format!("in [{}, {}]", range[0], range[1]),
            passed: value >= range[0] && value <= range[1],
        }
    }

    pub fn holds(name: &str, value: f64, requirement: &str, passed: bool) -> Self {
        Check { name: name.into(), value, requirement: requirement.into(), passed }
    }
}

/// Results of one named experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub name: String,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
    pub wall_clock_s: f64,
}

impl ExperimentOutcome {
    pub fn new(name: &str) -> Self {
        ExperimentOutcome { name: name.into(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn metric(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.into(), v);
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Summary of a run, written as `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub rng: String,
    pub experiment: String,
    pub workers: usize,
    pub passed: bool,
    pub wall_clock_s: f64,
    pub outcomes: Vec<ExperimentOutcome>,
    pub config: RunConfig,
}

impl RunReport {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("summary.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json"))?)?)
    }
}

/// Output directory: explicit argument, then `DTN_PROBE_OUT`, then the config.
pub fn resolve_output_dir(cli: Option<&Path>, config: &RunConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Ok(p) = std::env::var("DTN_PROBE_OUT") {
        if !p.is_empty() {
            return PathBuf::from(p);
        }
    }
    PathBuf::from(&config.output_dir)
}

/// Runs `experiment` (or every experiment for `all`) and writes the report.
pub fn run(config: &RunConfig, experiment: &str, out: &Path, workers: usize) -> Result<RunReport> {
    config.validate()?;
    let names: Vec<&str> = if experiment == "all" {
        EXPERIMENTS.to_vec()
    } else if EXPERIMENTS.contains(&experiment) {
        vec![experiment]
    } else {
        return Err(Error::Config(format!(
            "unknown experiment '{experiment}' (expected one of {} or all)",
            EXPERIMENTS.join(", ")
        )));
    };
    std::fs::create_dir_all(out)?;
    let start = std::time::Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut outcomes = Vec::new();
    let mut plots = Vec::new();
    for name in names {
        let t = std::time::Instant::now();
        let (mut outcome, mut specs) = pool.install(|| run_experiment(config, name, out))?;
        outcome.wall_clock_s = t.elapsed().as_secs_f64();
        outcomes.push(outcome);
        plots.append(&mut specs);
    }
    let manifest = out.join("plots.json");
    std::fs::write(&manifest, serde_json::to_string_pretty(&plots)?)?;
    render_manifest(out)?;
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        rng: crate::oracles::RNG_ALGORITHM.into(),
        experiment: experiment.into(),
        workers: workers.max(1),
        passed: outcomes.iter().all(|o| o.passed()),
        wall_clock_s: start.elapsed().as_secs_f64(),
        outcomes,
        config: config.clone(),
    };
    report.write(out)?;
    Ok(report)
}
