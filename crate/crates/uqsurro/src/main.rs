use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uqsurro::{load_config, run_stage, Overrides, Stage};

#[derive(Parser)]
#[command(
    name = "uqsurro",
    version,
    about = "Uncertainty quantification studies for neural-network surrogates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Run directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace this stage's existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the design and evaluate the simulator (or import a CSV).
    Generate(Common),
    /// Reduce curve outputs to principal-component scores.
    Pca(Common),
    /// Train one model per response.
    Train(Common),
    /// Predictive distributions and coverage on the test partition.
    Uq(Common),
    /// Tidy tables across every method in the run directory.
    Report(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (stage, args) = match cli.command {
        Command::Generate(a) => (Stage::Generate, a),
        Command::Pca(a) => (Stage::Pca, a),
        Command::Train(a) => (Stage::Train, a),
        Command::Uq(a) => (Stage::Uq, a),
        Command::Report(a) => (Stage::Report, a),
    };
    let overrides = Overrides {
        out: args.out,
        seed: args.seed,
        force: args.force,
    };
    let result = load_config(&args.config, &overrides).and_then(|cfg| run_stage(stage, &cfg, overrides.force));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
