use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use podnn::cli;
use podnn::config::RunConfig;
use podnn::exec;

#[derive(Parser)]
#[command(
    name = "podnn",
    version,
    about = "POD-NN surrogates for parametric Galerkin problems"
)]
struct Args {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or output directory for `study`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for snapshot solves and evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured QMC points as CSV.
    Qmc,
    /// Solve the problem at the QMC points and write a snapshot file.
    Sample,
    /// Build a reduced basis from a snapshot file.
    Pod { snapshots: PathBuf },
    /// Train a network on the reduced coefficients of the snapshots.
    Train { snapshots: PathBuf, basis: PathBuf },
    /// Print test-set error metrics of a trained model as JSON.
    Eval { model: PathBuf, basis: PathBuf },
    /// Run the N-convergence study.
    Study,
}

fn out_path(out: &Option<PathBuf>, default: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn run(args: &Args) -> podnn::Result<()> {
    let cfg = match &args.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    exec::with_threads(args.threads, || match &args.command {
        Command::Qmc => cli::cmd_qmc(&cfg, &out_path(&args.out, "points.csv")),
        Command::Sample => cli::cmd_sample(&cfg, &out_path(&args.out, "snapshots.psnp")),
        Command::Pod { snapshots } => {
            cli::cmd_pod(snapshots, &cfg, &out_path(&args.out, "basis.prbs"))
        }
        Command::Train { snapshots, basis } => {
            cli::cmd_train(snapshots, basis, &cfg, &out_path(&args.out, "model.pmlp"))
        }
        Command::Eval { model, basis } => {
            let json = cli::cmd_eval(model, basis, &cfg)?;
            match &args.out {
                Some(p) => std::fs::write(p, json)?,
                None => print!("{json}"),
            }
            Ok(())
        }
        Command::Study => cli::cmd_study(&cfg, &out_path(&args.out, "study")).map(|_| ()),
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", cli::error_line(&e));
            ExitCode::FAILURE
        }
    }
}
