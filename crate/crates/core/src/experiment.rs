//! Experiment plumbing: algorithm ids, configuration, replicated runs and
//! the CSV convergence log.

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rayon::prelude::*;
use thiserror::Error;

use crate::adaptive::{self, AdaptiveOptions};
use crate::diagram::Manager;
use crate::dp::{self, DpError, HeuristicMode, ValueFunction};
use crate::generator::{self, GeneratorConfig, GeneratorError};
use crate::model::{parse_model, validate_model, FactoredMdp, ModelError};
use crate::planners::{self, CpuClock, Generalization, PlannerError, SimRng, TrialLog, TrialSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Vi,
    Lao,
    Rtdp,
    SrtdpValue,
    SrtdpReach,
    Artdp,
    AsrtdpValue,
    AsrtdpReach,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Vi,
        Algorithm::Lao,
        Algorithm::Rtdp,
        Algorithm::SrtdpValue,
        Algorithm::SrtdpReach,
        Algorithm::Artdp,
        Algorithm::AsrtdpValue,
        Algorithm::AsrtdpReach,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Vi => "vi",
            Algorithm::Lao => "lao",
            Algorithm::Rtdp => "rtdp",
            Algorithm::SrtdpValue => "srtdp-value",
            Algorithm::SrtdpReach => "srtdp-reach",
            Algorithm::Artdp => "artdp",
            Algorithm::AsrtdpValue => "asrtdp-value",
            Algorithm::AsrtdpReach => "asrtdp-reach",
        }
    }

    pub fn is_trial_based(self) -> bool {
        !matches!(self, Algorithm::Vi | Algorithm::Lao)
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, Algorithm::Artdp | Algorithm::AsrtdpValue | Algorithm::AsrtdpReach)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL.into_iter().find(|a| a.id() == s).ok_or_else(|| {
            let ids: Vec<_> = Algorithm::ALL.iter().map(|a| a.id()).collect();
            format!("unknown algorithm `{s}` (expected one of {})", ids.join(", "))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSource {
    File(PathBuf),
    Text(String),
    Generate(GeneratorConfig),
}

impl FromStr for ModelSource {
    type Err = String;

    /// Parses a generator spec `seed,vars,actions,maxParents[,discount]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || format!("expected seed,nVars,nActions,maxParents[,discount], got `{s}`");
        if !(4..=5).contains(&parts.len()) {
            return Err(bad());
        }
        let seed = parts[0].parse().map_err(|_| bad())?;
        let n: Vec<usize> = parts[1..4].iter().map(|p| p.parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let mut cfg = GeneratorConfig::new(seed, n[0], n[1], n[2]);
        if let Some(d) = parts.get(4) {
            cfg.discount = d.parse().map_err(|_| bad())?;
        }
        Ok(ModelSource::Generate(cfg))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub source: ModelSource,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub steps: usize,
    pub seed: u64,
    pub delta: Option<f64>,
    pub epsilon: f64,
    pub tol: f64,
    pub heuristic: HeuristicMode,
    pub runs: usize,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(source: ModelSource, algorithm: Algorithm) -> Self {
        ExperimentConfig {
            source,
            algorithm,
            trials: 100,
            steps: 20,
            seed: 0,
            delta: None,
            epsilon: adaptive::DEFAULT_EPSILON,
            tol: dp::DEFAULT_TOLERANCE,
            heuristic: HeuristicMode::Bound,
            runs: 1,
            output: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("writing CSV: {0}")]
    Write(#[from] io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("model is invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub algo: Algorithm,
    pub run: usize,
    pub trial: usize,
    pub cpu_ms: f64,
    pub v_start: f64,
    pub trial_reward: Option<f64>,
}

pub const CSV_HEADER: &str = "algo,run,trial,cpu_ms,v_start,trial_reward";

/// `x` with 6 significant digits, shortest form.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("scientific format parses");
    let exp = rounded.abs().log10().floor() as i32;
    let text = if (-5..=15).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{rounded:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').expect("scientific format");
        let mantissa = if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
        format!("{mantissa}e{e}")
    };
    if text == "-0" {
        "0".to_string()
    } else {
        text
    }
}

pub fn write_csv(rows: &[CsvRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let reward = r.trial_reward.map(format_sig6).unwrap_or_default();
        writeln!(out, "{},{},{},{},{},{}", r.algo, r.run, r.trial, format_sig6(r.cpu_ms), format_sig6(r.v_start), reward)?;
    }
    Ok(())
}

pub fn emit_csv(rows: &[CsvRow], path: &Path) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = io::BufWriter::new(file);
    write_csv(rows, &mut out)?;
    out.flush()
}

/// One row per trial of `log`.
pub fn rows_from_log(algo: Algorithm, run: usize, log: &TrialLog) -> Vec<CsvRow> {
    log.trials
        .iter()
        .map(|t| CsvRow { algo, run, trial: t.trial, cpu_ms: t.cpu_ms, v_start: t.v_start, trial_reward: Some(t.reward) })
        .collect()
}

pub fn load_model(source: &ModelSource) -> Result<(Manager, FactoredMdp), ExperimentError> {
    let (mut mgr, m) = match source {
        ModelSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Read { path: path.clone(), source: e })?;
            parse_model(&text)?
        }
        ModelSource::Text(text) => parse_model(text)?,
        ModelSource::Generate(cfg) => generator::generate_with(cfg)?,
    };
    let report = validate_model(&mut mgr, &m);
    if !report.is_valid() {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(ExperimentError::Invalid(msgs.join("; ")));
    }
    Ok((mgr, m))
}

/// Random stream for replica `run`: the seed picks the generator, the run
/// index picks the stream.
pub fn run_rng(seed: u64, run: usize) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

fn run_once(config: &ExperimentConfig, run: usize) -> Result<Vec<CsvRow>, ExperimentError> {
    let (mut mgr, m) = load_model(&config.source)?;
    let algo = config.algorithm;
    let s0 = m.start();
    let schedule = TrialSchedule { trials: config.trials, steps: config.steps };
    let mut rng = run_rng(config.seed, run);
    let value_mode = Generalization::Value { delta: config.delta };
    let log = match algo {
        Algorithm::Vi => {
            let clock = CpuClock::start();
            let h = initial_value(&mut mgr, &m, config.heuristic)?;
            let mut rows = Vec::new();
            dp::value_iteration_with(&mut mgr, &m, h, config.tol, dp::DEFAULT_MAX_ITERATIONS, |mgr, it, v, _| {
                let v_start = v.at(mgr, &s0);
                rows.push(CsvRow { algo, run, trial: it, cpu_ms: clock.elapsed_ms(), v_start, trial_reward: None });
            })?;
            return Ok(rows);
        }
        Algorithm::Lao => {
            let h = initial_value(&mut mgr, &m, config.heuristic)?;
            let result = planners::run_lao_star(&mut mgr, &m, h, &s0, config.tol)?;
            return Ok(result
                .history
                .into_iter()
                .map(|it| CsvRow { algo, run, trial: it.iteration, cpu_ms: it.cpu_ms, v_start: it.v_start, trial_reward: None })
                .collect());
        }
        Algorithm::Rtdp => {
            let h = initial_value(&mut mgr, &m, config.heuristic)?;
            planners::run_rtdp(&mut mgr, &m, h, &s0, schedule, &mut rng).1
        }
        Algorithm::SrtdpValue | Algorithm::SrtdpReach => {
            let h = initial_value(&mut mgr, &m, config.heuristic)?;
            let mode = if algo == Algorithm::SrtdpValue { value_mode } else { Generalization::Reach };
            planners::run_srtdp(&mut mgr, &m, h, &s0, schedule, &mut rng, mode)?.1
        }
        Algorithm::Artdp | Algorithm::AsrtdpValue | Algorithm::AsrtdpReach => {
            let mode = match algo {
                Algorithm::Artdp => Generalization::Single,
                Algorithm::AsrtdpValue => value_mode,
                _ => Generalization::Reach,
            };
            let opts = AdaptiveOptions { epsilon: config.epsilon, ..AdaptiveOptions::default() };
            adaptive::run_asrtdp_with(&mut mgr, &m, &s0, schedule, &mut rng, mode, opts)?.log
        }
    };
    Ok(rows_from_log(algo, run, &log))
}

fn initial_value(mgr: &mut Manager, m: &FactoredMdp, mode: HeuristicMode) -> Result<ValueFunction, DpError> {
    dp::admissible_heuristic(mgr, m, mode)
}

pub fn check_config(config: &ExperimentConfig) -> Result<(), ExperimentError> {
    if config.algorithm.is_trial_based() && config.steps == 0 {
        return Err(ExperimentError::Config("--steps must be positive for trial-based algorithms".into()));
    }
    if config.runs == 0 {
        return Err(ExperimentError::Config("--runs must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.epsilon) {
        return Err(ExperimentError::Config(format!("epsilon {} is outside [0, 1]", config.epsilon)));
    }
    if config.delta.is_some_and(|d| !(d >= 0.0 && d.is_finite())) {
        return Err(ExperimentError::Config("delta must be a non-negative number".into()));
    }
    if !(config.tol > 0.0 && config.tol.is_finite()) {
        return Err(ExperimentError::Config("tol must be positive".into()));
    }
    Ok(())
}

/// Runs every replica (in parallel), concatenates rows in run order and
/// writes them to the configured output, if any.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<CsvRow>, ExperimentError> {
    check_config(config)?;
    let per_run: Vec<Vec<CsvRow>> = (0..config.runs).into_par_iter().map(|run| run_once(config, run)).collect::<Result<_, _>>()?;
    let rows: Vec<CsvRow> = per_run.into_iter().flatten().collect();
    if let Some(path) = &config.output {
        emit_csv(&rows, path)?;
    }
    Ok(rows)
}
