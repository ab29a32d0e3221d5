//! Binary entry point for the risk-constrained bandit laboratory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use riskbandit::cli::config::resolve_config;
use riskbandit::cli::presets::{preset, PRESET_NAMES};
use riskbandit::cli::run::{run_experiment, CliError};

#[derive(Debug, Parser)]
#[command(name = "riskbandit", version, about = "Risk-constrained bandit experiment runner")]
struct Cli {
    /// Path to a TOML experiment config (mutually exclusive with --preset).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Name of a shipped preset (mutually exclusive with --config).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,

    /// Override the base RNG seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the horizon (replaces any horizon list).
    #[arg(long)]
    horizon: Option<usize>,

    /// Override the number of Monte-Carlo repetitions.
    #[arg(long)]
    reps: Option<usize>,

    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Suppress the stdout report.
    #[arg(long)]
    quiet: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let text = match (&cli.config, &cli.preset) {
        (Some(path), None) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?,
        (None, Some(name)) => preset(name)
            .ok_or_else(|| {
                CliError::Config(vec![format!(
                    "unknown preset `{name}`; available: {}",
                    PRESET_NAMES.join(", ")
                )])
            })?
            .to_string(),
        _ => {
            return Err(CliError::Config(vec![
                "exactly one of --config or --preset is required".into(),
            ]))
        }
    };

    let mut exp = resolve_config(&text)?;

    if let Some(seed) = cli.seed {
        exp.base_seed = seed;
        exp.config_echo.run.base_seed = seed;
    }
    if let Some(horizon) = cli.horizon {
        let k = exp.instance.arms.len();
        if horizon < k {
            return Err(CliError::Config(vec![format!(
                "--horizon {horizon} is smaller than the number of arms ({k})"
            )]));
        }
        exp.horizons = vec![horizon];
        exp.config_echo.run.horizon = Some(horizon);
        exp.config_echo.run.horizons = None;
    }
    if let Some(reps) = cli.reps {
        if reps == 0 {
            return Err(CliError::Config(vec!["--reps must be positive".into()]));
        }
        exp.reps = reps;
        exp.config_echo.run.reps = reps;
    }
    if let Some(out) = cli.out {
        exp.out_dir = out;
    }

    if let Ok(threads) = std::env::var("RISKBANDIT_THREADS") {
        let n: usize = threads.parse().map_err(|_| {
            CliError::Config(vec![format!(
                "RISKBANDIT_THREADS must be a positive integer, got `{threads}`"
            )])
        })?;
        if n == 0 {
            return Err(CliError::Config(vec![
                "RISKBANDIT_THREADS must be a positive integer".into(),
            ]));
        }
        // Ignore the error if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    run_experiment(&exp, cli.quiet).map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
