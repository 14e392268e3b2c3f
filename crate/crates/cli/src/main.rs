use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use symdp_core::experiment::{run_experiment, write_csv, Algorithm, ExperimentConfig, ModelSource};
use symdp_core::generator::generate_with;
use symdp_core::model::{parse_model, serialize_model, validate_model};
use symdp_core::HeuristicMode;

/// Symbolic planners for factored MDPs.
#[derive(Parser)]
#[command(name = "symdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a planner and write its convergence log as CSV.
    Run(RunArgs),
    /// Print a generated model in the text format.
    Generate {
        /// seed,nVars,nActions,maxParents[,discount]
        spec: ModelSource,
    },
    /// Check a model file and report violations.
    Validate { model: PathBuf },
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["model", "generate"]))]
struct RunArgs {
    /// Model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Generated model: seed,nVars,nActions,maxParents[,discount].
    #[arg(long, value_name = "SPEC")]
    generate: Option<ModelSource>,
    /// vi, lao, rtdp, srtdp-value, srtdp-reach, artdp, asrtdp-value or asrtdp-reach.
    #[arg(long)]
    algo: Algorithm,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Value-generalization radius; default 1% of the value range.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value = "bound")]
    heuristic: HeuristicMode,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: RunArgs) -> Result<()> {
    let source = match (args.model, args.generate) {
        (Some(path), None) => ModelSource::File(path),
        (None, Some(spec)) => spec,
        _ => bail!("give exactly one of --model and --generate"),
    };
    let config = ExperimentConfig {
        trials: args.trials,
        steps: args.steps,
        seed: args.seed,
        delta: args.delta,
        epsilon: args.epsilon,
        tol: args.tol,
        heuristic: args.heuristic,
        runs: args.runs,
        output: args.out.clone(),
        ..ExperimentConfig::new(source, args.algo)
    };
    let rows = run_experiment(&config)?;
    if args.out.is_none() {
        write_csv(&rows, std::io::stdout().lock())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Generate { spec } => match spec {
            ModelSource::Generate(cfg) => generate_with(&cfg)
                .map(|(mgr, m)| print!("{}", serialize_model(&mgr, &m)))
                .map_err(Into::into),
            _ => unreachable!("the spec parser only yields generator sources"),
        },
        Command::Validate { model } => validate(&model),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn validate(path: &PathBuf) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut mgr, m) = parse_model(&text)?;
    let report = validate_model(&mut mgr, &m);
    if report.is_valid() {
        println!("ok: {} variables, {} actions", m.num_vars(), m.num_actions());
        return Ok(());
    }
    for v in &report.violations {
        println!("{v}");
    }
    bail!("{} violation(s)", report.violations.len())
}
