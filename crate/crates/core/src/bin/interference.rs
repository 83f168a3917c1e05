use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use interference::config::{ExperimentConfig, Task};
use interference::estimands::Method;
use interference::runner;
use interference::Error;

/// Estimands and estimators for experiments with interference.
#[derive(Parser)]
#[command(name = "interference", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// ADE, AIE, AOE and INF over the configured π sweep.
    Estimands(RunArgs),
    /// Horvitz–Thompson replication harness.
    Estimators(RunArgs),
    /// Figure-1 curves for the three structural settings.
    Fig1(RunArgs),
    /// Randomized battery checking AOE = INF.
    #[command(name = "verify-theorem1")]
    VerifyTheorem1(RunArgs),
    /// Parse and build everything in a config without running it.
    ValidateConfig(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (directory for fig1); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    replications: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_BATTERY: u8 = 3;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Infeasible(_) | Error::SupportTooLarge { .. } | Error::NonBernoulliDesign(_) => EXIT_INFEASIBLE,
        _ => EXIT_CONFIG,
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(method) = args.method {
        cfg.method = method;
    }
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(task: Task, args: &RunArgs) -> Result<u8, Error> {
    let cfg = load(args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Infeasible(format!("cannot start worker pool: {e}")))?;
    let outcome = pool.install(|| runner::execute(task, &cfg, args.out.as_deref()))?;
    for path in outcome.written.iter().filter(|p| p.as_os_str() != "-") {
        eprintln!("wrote {}", path.display());
    }
    match outcome.battery_passed {
        Some(false) => {
            eprintln!("verify-theorem1: at least one instance exceeded the tolerance");
            Ok(EXIT_BATTERY)
        }
        _ => Ok(0),
    }
}

fn validate(args: &ValidateArgs) -> Result<u8, Error> {
    let cfg = ExperimentConfig::load(&args.config)?;
    if cfg.model.is_some() {
        let model = cfg.build_model()?;
        if cfg.design.is_some() {
            cfg.build_design(model.n(), None)?;
        }
        cfg.analyst_graph(&model)?;
    }
    println!("ok");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimands(a) => run(Task::Estimands, a),
        Command::Estimators(a) => run(Task::Estimators, a),
        Command::Fig1(a) => run(Task::Fig1, a),
        Command::VerifyTheorem1(a) => run(Task::VerifyTheorem1, a),
        Command::ValidateConfig(a) => validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
