use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rfwgan_cli::commands::{self, Overrides};
use rfwgan_cli::config::{LandscapeCenter, LandscapeMode};

/// Random-feature WGAN experiments.
#[derive(Parser)]
#[command(name = "rfwgan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed, overriding `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root, overriding `experiment.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train with SGAD; writes history, checkpoints, samples and a KDE.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the reduced loss over a 2-D grid.
    Landscape {
        #[arg(long)]
        config: PathBuf,
        /// `direct` (N_g = 2 only) or `plane`.
        #[arg(long)]
        mode: Option<LandscapeMode>,
        /// `zero` or a checkpoint path.
        #[arg(long)]
        center: Option<LandscapeCenter>,
        #[command(flatten)]
        common: Common,
    },
    /// Stationarity report and Jacobian scans for a checkpoint.
    Diagnose {
        /// Checkpoint to inspect.
        #[arg(long, alias = "config")]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Convergence ladder of the random-feature delta approximation.
    #[command(name = "approx-lab")]
    ApproxLab {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Target samples and KDE; generated ones too given a checkpoint.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("RFWGAN_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("RFWGAN_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the worker pool")?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Train { config, common } => {
            let cfg = commands::load_config(&config, &common.overrides())?;
            commands::train(&cfg, &mut out)?;
        }
        Command::Landscape {
            config,
            mode,
            center,
            common,
        } => {
            let cfg = commands::load_config(&config, &common.overrides())?;
            commands::landscape(&cfg, mode, center, &mut out)?;
        }
        Command::Diagnose { checkpoint, common } => {
            commands::diagnose(&checkpoint, &common.overrides(), &mut out)?;
        }
        Command::ApproxLab { config, common } => {
            let cfg = commands::load_config(&config, &common.overrides())?;
            commands::approx_lab(&cfg, &mut out)?;
        }
        Command::Sample {
            config,
            checkpoint,
            common,
        } => {
            let cfg = commands::load_config(&config, &common.overrides())?;
            commands::sample(&cfg, checkpoint.as_deref(), &mut out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
