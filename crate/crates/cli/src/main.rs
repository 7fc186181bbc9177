//! `e3dtv`: batch CLI for enhanced-3DTV hyperspectral denoising and
//! compressed sensing.
//!
//! Exit codes: 0 success (convergence criteria met where applicable),
//! 1 configuration/validation error, 2 I/O or file-format error,
//! 3 numerical failure or non-convergence within the iteration cap.

mod commands;
mod config;
mod plot;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use e3dtv_core::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "e3dtv",
    version,
    about = "E-3DTV hyperspectral denoising and compressed sensing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TaskArgs {
    /// Configuration file with flat `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key (repeatable): --set key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// RNG seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (1 = deterministic reference mode).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the denoising solver on a tensor file.
    Denoise(TaskArgs),
    /// Build the compressive operator and write a measurement file.
    CsSample(TaskArgs),
    /// Reconstruct a tensor from a measurement file.
    CsReconstruct(TaskArgs),
    /// Apply one of the structured noise cases to a tensor.
    SimulateNoise(TaskArgs),
    /// Compute PSNR/SSIM/ERGAS between two tensor files.
    Evaluate(TaskArgs),
    /// Sweep noise cases or sampling ratios on a phantom.
    Benchmark(TaskArgs),
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidParam(_) | Error::ShapeMismatch { .. } | Error::Infeasible(_) => 1,
        Error::Io(_) | Error::Format(_) | Error::ChecksumMismatch { .. } => 2,
        Error::NonFinite(_) | Error::Numerical(_) | Error::CgDiverged { .. } => 3,
    }
}

fn run(command: &Command) -> Result<commands::Outcome, Error> {
    let args = match command {
        Command::Denoise(a)
        | Command::CsSample(a)
        | Command::CsReconstruct(a)
        | Command::SimulateNoise(a)
        | Command::Evaluate(a)
        | Command::Benchmark(a) => a,
    };
    let mut cfg = RunConfig::load(args.config.as_deref(), &args.set)?;
    if let Some(seed) = args.seed {
        cfg.set("seed", seed.to_string());
    }
    if let Some(threads) = args.threads {
        cfg.set("threads", threads.to_string());
    }

    let threads = cfg.threads()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Denoise(_) => commands::cmd_denoise(&cfg),
        Command::CsSample(_) => commands::cmd_cs_sample(&cfg),
        Command::CsReconstruct(_) => commands::cmd_cs_reconstruct(&cfg),
        Command::SimulateNoise(_) => commands::cmd_simulate_noise(&cfg),
        Command::Evaluate(_) => commands::cmd_evaluate(&cfg),
        Command::Benchmark(_) => commands::cmd_benchmark(&cfg),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(outcome) => {
            if outcome.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: convergence criteria not met within the iteration cap");
                ExitCode::from(3)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
