use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use clips_cli::{cmd_clips, cmd_fit, cmd_report, cmd_simulate, load_config, ClipsOverrides, ClipsSection};

#[derive(Parser)]
#[command(
    name = "clips",
    about = "Bayesian mixture fitting with CliPS cluster identification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from the configured generator.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the mixture model by MCMC and write a draw store.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of independent chains (seeds seed, seed+1, ...).
        #[arg(long, default_value_t = 1)]
        chains: usize,
    },
    /// Post-process a draw store with CliPS.
    Clips {
        /// Draw store (JSON Lines) produced by `fit`.
        store: PathBuf,
        /// Optional config file supplying [clips] defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the estimated number of clusters.
        #[arg(long)]
        kplus: Option<usize>,
        /// Minimum fill fraction for a component to count as a cluster.
        #[arg(long)]
        min_fill: Option<f64>,
        /// Functional to cluster: full_parameter, gaussian_means,
        /// markov_persistence, or custom:i,j,...
        #[arg(long)]
        functional: Option<String>,
        /// k-means restarts for the PPR clustering.
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Print a human-readable summary of a CliPS result.
    Report {
        /// result.json produced by `clips`.
        result: PathBuf,
        /// Truth file (from `simulate`) for confusion matrix / accuracy / ARI.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> clips_core::Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let cfg = load_config(&config)?;
            let base = config.parent().unwrap_or(std::path::Path::new("."));
            cmd_simulate(&cfg, base, seed, out.as_deref())?;
        }
        Command::Fit {
            config,
            seed,
            out,
            chains,
        } => {
            let cfg = load_config(&config)?;
            cmd_fit(&cfg, &config, seed, out.as_deref(), chains)?;
        }
        Command::Clips {
            store,
            config,
            seed,
            out,
            kplus,
            min_fill,
            functional,
            restarts,
        } => {
            let section = match config {
                Some(path) => load_config(&path)?.clips,
                None => ClipsSection::default(),
            };
            let over = ClipsOverrides {
                functional,
                min_fill,
                restarts,
                kplus,
                seed,
            };
            cmd_clips(&store, &section, &over, out.as_deref())?;
        }
        Command::Report { result, truth } => {
            cmd_report(&result, truth.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
