//! `roml`: learn uncertainty sets, solve robust portfolios and check guarantees.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{CommandFactory, Parser, Subcommand};

use commands::{Outcome, UsageError};
use config::Config;

#[derive(Parser)]
#[command(name = "roml", version, about = "Data-driven uncertainty sets for robust optimization")]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo trials.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override a config entry (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic training set.
    GenData {
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a box uncertainty set for the query points.
    BuildSet {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the robust minimum-variance portfolio against a box.
    Solve {
        #[arg(long = "box")]
        box_path: PathBuf,
        /// Covariance matrix CSV without header; identity when omitted.
        #[arg(long)]
        cov: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo check of a method's feasibility guarantee.
    Validate {
        #[arg(long)]
        out: PathBuf,
        /// Plot-ready CSV; defaults to the JSON path with a .csv extension.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Outcome> {
    let cfg = Config::load(cli.config.as_deref(), &cli.set)?;
    let seed = match cli.seed {
        Some(s) => s,
        None => cfg.or("seed", 0u64)?,
    };
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::GenData { out } => commands::gen_data(&cfg, seed, &out),
        Command::BuildSet { train, queries, out } => commands::build_set(&cfg, seed, &train, &queries, &out),
        Command::Solve { box_path, cov, out } => commands::solve(&cfg, seed, &box_path, cov.as_deref(), &out),
        Command::Validate { out, csv } => {
            let csv = csv.unwrap_or_else(|| out.with_extension("csv"));
            commands::validate(&cfg, seed, &out, &csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::GuaranteeFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            ExitCode::from(2)
        }
    }
}
