//! `loglearn`: batch CLI over the library. Verbs: `train`, `evaluate`,
//! `run` (train + evaluate), `report`, `gradcheck`, `selftest`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 diverged
//! training.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use logical_learning::experiment::{
    self, evaluate_case, report, run_case, train_case, ExperimentConfig, ExperimentError,
    StoredMetrics,
};
use logical_learning::nn::gradcheck;
use logical_learning::train::TrainSnapshot;

#[derive(Parser)]
#[command(
    name = "loglearn",
    version,
    about = "Logical learning on MNIST: hybrid indicator networks with verdict checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a case; writes checkpoint.bin, train_log.csv and config.txt.
    Train(RunArgs),
    /// Evaluate the stored checkpoint on the test split; writes
    /// metrics.txt (and verdicts.csv for hybrid cases).
    Evaluate(RunArgs),
    /// Train then evaluate: the full experiment for one case.
    Run(RunArgs),
    /// Compare result bundles: a Tables 3/4-style summary plus the
    /// four-group averages.
    Report {
        /// Result directories written by `run` or `evaluate`.
        dirs: Vec<PathBuf>,
    },
    /// Finite-difference audit of every analytic gradient (float64,
    /// downsized model).
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reasoner oracle suite: random synthetic bundles for every
    /// cataloged case against a brute-force restatement of the checks.
    Selftest {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Run config file (flat `key = value`); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Case id (benchmark, 11-14, 21-24, 31-33) when no config is given.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

enum CliError {
    Usage(String),
    Lib(ExperimentError),
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) => e.exit_code() as u8,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match (&args.config, &args.case) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(case)) => ExperimentConfig::new(case),
        (None, None) => {
            return Err(CliError::Usage(
                "either --config <file> or --case <id> is required".to_string(),
            ))
        }
    };
    if let Some(case) = &args.case {
        config.case = case.clone();
    }
    if let Some(steps) = args.steps {
        config.steps = steps;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(data_dir) = &args.data_dir {
        config.data_dir = data_dir.clone();
    }
    if let Some(out_dir) = &args.out_dir {
        config.out_dir = Some(out_dir.clone());
    }
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    Ok(config)
}

fn print_snapshot(config: &ExperimentConfig) -> impl FnMut(&TrainSnapshot) + '_ {
    move |s: &TrainSnapshot| {
        let eval = s
            .eval_accuracy
            .map(|a| format!("{a:.4}"))
            .unwrap_or_else(|| "-".to_string());
        println!(
            "step {:>6}/{} loss {:.4} lr {:.6} test-probe acc {}",
            s.step, config.steps, s.mean_loss, s.learning_rate, eval
        );
    }
}

fn print_metrics(stored: &StoredMetrics) {
    match stored {
        StoredMetrics::Benchmark(b) => {
            println!(
                "benchmark: {}/{} correct, accuracy {:.4}",
                b.correct,
                b.total,
                b.accuracy()
            );
        }
        StoredMetrics::Hybrid { case, metrics } => {
            println!(
                "case {case}: pass {:.4}, logical acc {:.4}, overall {:.4} \
                 ({} logical / {} correct / {} conflict-count fails / {} compliance fails)",
                metrics.logical_pass_rate(),
                metrics.logical_accuracy(),
                metrics.overall_accuracy(),
                metrics.logical,
                metrics.correct_logical,
                metrics.conflict_count_failed,
                metrics.compliance_failed,
            );
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train(args) => {
            let config = resolve_config(&args)?;
            let trained = train_case(&config, print_snapshot(&config))?;
            println!("wrote result bundle to {}", trained.out_dir.display());
        }
        Command::Evaluate(args) => {
            let config = resolve_config(&args)?;
            let stored = evaluate_case(&config)?;
            print_metrics(&stored);
            println!(
                "wrote metrics to {}",
                config.resolved_out_dir().join("metrics.txt").display()
            );
        }
        Command::Run(args) => {
            let config = resolve_config(&args)?;
            let stored = run_case(&config, print_snapshot(&config))?;
            print_metrics(&stored);
            println!("wrote result bundle to {}", config.resolved_out_dir().display());
        }
        Command::Report { dirs } => {
            if dirs.is_empty() {
                return Err(CliError::Usage(
                    "report needs at least one result directory".to_string(),
                ));
            }
            print!("{}", report(&dirs)?);
        }
        Command::Gradcheck { seed } => {
            let report = gradcheck::run(seed);
            println!(
                "checked {} parameters; max relative error {:.3e} \
                 (worst: {}[{}], analytic {:.6e} vs numeric {:.6e})",
                report.checked,
                report.max_rel_error,
                report.worst_tensor,
                report.worst_index,
                report.analytic_at_worst,
                report.numeric_at_worst,
            );
            if report.passes(1e-4) {
                println!("gradcheck passed (tolerance 1e-4)");
            } else {
                return Err(CliError::Usage(
                    "gradcheck FAILED: analytic and numeric gradients disagree".to_string(),
                ));
            }
        }
        Command::Selftest { trials, seed } => {
            let report = experiment::selftest(trials, seed);
            println!(
                "reasoner self-test: {} cases x {} trials, {} mismatches",
                report.cases, report.trials_per_case, report.mismatches
            );
            if !report.passed() {
                return Err(ExperimentError::SelftestFailed(report.mismatches).into());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
