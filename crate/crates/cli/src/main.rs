use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use warpam_cli::commands::{self, Common};
use warpam_cli::config::ExperimentConfig;
use warpam_cli::{exit, CliError};

/// Joint estimation of amplitude modulation, time warping and spectrum of deformed
/// stationary signals.
#[derive(Parser)]
#[command(name = "warpam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML experiment configuration (defaults apply to missing keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a deformed stationary signal with its ground truth.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Estimate amplitude, warping and spectrum from a mono WAV file.
    Estimate {
        /// Input WAV file.
        input: PathBuf,
        /// Ground-truth sidecar for scoring (default: `<input>.truth.json` if present).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// White-noise variance σ_W² of the input; selects the noisy model.
        #[arg(long)]
        noisy: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Simulated passing source: Doppler warp estimation against the closed form.
    Doppler {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Multi-seed benchmark: MSE table, CRLB coverage and bound checks.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn common(args: &CommonArgs) -> Result<Common, CliError> {
    let config = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    std::fs::create_dir_all(&args.out)?;
    Ok(Common { config, seed: args.seed, out: args.out.clone(), quiet: args.quiet })
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Synth { common: a } => commands::synth(&common(&a)?),
        Command::Estimate { input, truth, noisy, common: a } => {
            commands::estimate(&common(&a)?, &input, truth.as_deref(), noisy)
        }
        Command::Doppler { common: a } => commands::doppler(&common(&a)?),
        Command::Bench { common: a } => commands::bench(&common(&a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(false) => exit::OK,
        Ok(true) => {
            eprintln!("warning: finished without convergence or with failed frames");
            exit::WARNINGS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
