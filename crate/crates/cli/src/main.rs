use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cmd;

const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "prox24",
    version,
    about = "Learn and evaluate 2:4 sparsity masks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time EnumALM, EnumPGD and the brute-force reference on random blocks
    /// and report the objective gap to the reference.
    SolverBench {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        /// Number of log-spaced prox strengths.
        #[arg(long, default_value_t = 200)]
        lambdas: usize,
        #[arg(long, default_value_t = 1e-3)]
        lambda_min: f64,
        #[arg(long, default_value_t = 10.0)]
        lambda_max: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Directory for `bench.csv` and `bench_report.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Spread instances over threads (timings are reported as parallel).
        #[arg(long)]
        parallel: bool,
    },
    /// Prox solutions of one block along a grid of strengths.
    RegPath {
        /// Comma-separated block, e.g. `1.4,1.1,1.0,0.7`.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        y: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        lambdas: usize,
        #[arg(long, default_value_t = 1e-3)]
        lambda_min: f64,
        #[arg(long, default_value_t = 10.0)]
        lambda_max: f64,
        /// Directory for `reg_path.csv`; CSV goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn masks for a generated teacher model and write the artifacts.
    Train {
        /// JSON file with flat training and task keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Test MSE of `W0 ⊙ mask` on a CSV test set. Masks must be 2:4-valid.
    Eval {
        /// Weight file per layer, input layer first.
        #[arg(long = "weights", required = true)]
        weights: Vec<PathBuf>,
        /// Mask file per layer, same order as `--weights`.
        #[arg(long = "mask", required = true)]
        masks: Vec<PathBuf>,
        #[arg(long)]
        testset: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::SolverBench {
            instances,
            lambdas,
            lambda_min,
            lambda_max,
            seed,
            out,
            parallel,
        } => cmd::solver_bench(
            prox24::bench::BenchConfig {
                n_instances: instances,
                n_lambdas: lambdas,
                lambda_min,
                lambda_max,
                seed,
                parallel,
                ..Default::default()
            },
            out.as_deref(),
        ),
        Command::RegPath {
            y,
            lambdas,
            lambda_min,
            lambda_max,
            out,
        } => cmd::reg_path(&y, lambdas, lambda_min, lambda_max, out.as_deref()),
        Command::Train { config, seed, out } => cmd::train(config.as_deref(), seed, &out),
        Command::Eval {
            weights,
            masks,
            testset,
        } => cmd::eval(&weights, &masks, &testset),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cmd::exit_code(&e))
        }
    }
}
