use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use synshift_cli::commands::{self, CliError};

/// Learns time-shifted kinematic synergies from velocity recordings and
/// reconstructs unseen movements from the trained bank.
#[derive(Parser)]
#[command(name = "synshift", version, about)]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print per-iteration progress to standard error.
    #[arg(long, global = true)]
    verbose: bool,

    /// Worker thread cap (also SYNERGY_THREADS); defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted synthetic dataset and its ground truth.
    Synth,
    /// Train a synergy bank by alternating minimization.
    Train,
    /// Reconstruct a test dataset from a trained bank and score it.
    Test,
    /// Integrate synergy velocities into posture (angle) trajectories.
    Postures,
}

fn resolve_threads(flag: Option<usize>, from_config: Option<usize>) -> Option<usize> {
    if let Some(t) = flag {
        return Some(t);
    }
    if let Ok(value) = std::env::var("SYNERGY_THREADS") {
        if let Ok(t) = value.parse::<usize>() {
            if t >= 1 {
                return Some(t);
            }
        }
    }
    from_config
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let config = commands::load_config(&config_path)?;

    if let Some(threads) = resolve_threads(cli.threads, config.threads) {
        if threads == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))?;
    }

    match cli.command {
        Command::Synth => commands::cmd_synth(&config),
        Command::Train => commands::cmd_train(&config, cli.verbose),
        Command::Test => commands::cmd_test(&config),
        Command::Postures => commands::cmd_postures(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
