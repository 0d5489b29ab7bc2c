use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use regnewt_cli::commands::{cmd_rate_study, cmd_run, cmd_verify, CliOptions};
use regnewt_cli::config::load_config;

/// Newton-type iterative regularization for nonlinear ill-posed inverse
/// problems: config-driven runs, convergence-rate studies and structural
/// assumption verification.
#[derive(Parser)]
#[command(name = "regnewt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Output directory (overrides the config's [output] dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the (delta, seed) matrix.
    #[arg(long)]
    workers: Option<usize>,
    /// Replace the configured seed list with this single seed.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// One solver run per (delta, seed); per-iteration CSVs plus a summary.
    Run(Common),
    /// Median-error rate study over the noise levels with CSV + SVG output.
    RateStudy(Common),
    /// Structure-condition verification report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Swap in the zero-based Lardy sum (negative control: its residual
        /// positivity check fails with a concrete witness).
        #[arg(long)]
        lardy_zero_based: bool,
    },
}

enum Action {
    Run,
    RateStudy,
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, lardy_zero_based, action) = match &cli.command {
        Command::Run(c) => (c, false, Action::Run),
        Command::RateStudy(c) => (c, false, Action::RateStudy),
        Command::Verify {
            common,
            lardy_zero_based,
        } => (common, *lardy_zero_based, Action::Verify),
    };
    let cfg = match load_config(&common.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = CliOptions {
        out: common.out.clone(),
        workers: common.workers,
        seed_override: common.seed_override,
        lardy_zero_based,
    };
    let outcome = match action {
        Action::Run => cmd_run(&cfg, &opts),
        Action::RateStudy => cmd_rate_study(&cfg, &opts),
        Action::Verify => cmd_verify(&cfg, &opts),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
