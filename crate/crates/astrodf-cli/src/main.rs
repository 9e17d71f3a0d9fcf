//! Experiment harness for the adaptive-sampling trust-region solver.
//!
//! Subcommands: `run` (seeded macroreplications with per-seed trace CSVs),
//! `calibrate` (statistical calibration tables for the sampling rules and
//! model error bounds), `summarize` (quantiles vs. cumulative oracle calls
//! across traces). Exit codes: 0 ok, 2 config error, 3 unknown problem,
//! 4 no traces, 5 dimension mismatch.

mod commands;
mod config;
mod table;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use std::path::PathBuf;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: String) -> Self {
        CliError { code, message }
    }
}

#[derive(Parser)]
#[command(name = "astrodf", about = "Derivative-free stochastic trust-region experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded macroreplications and write trace/summary CSVs.
    Run {
        /// Experiment configuration file (flat key = value lines).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seed list (overrides the config's `seeds`).
        #[arg(long)]
        seeds: Option<String>,
        /// Worker threads for macroreplications (default: all cores).
        #[arg(long)]
        parallel: Option<usize>,
        /// Repeatable `key=value` config override.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Emit a calibration table: stopping, fully-linear, or error-bound.
    Calibrate {
        /// Which calibration to run.
        kind: String,
        /// Optional configuration file for calibrate.* parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Aggregate trace files into quantile-vs-calls tables.
    Summarize {
        /// Trace files or directories containing trace_<seed>.csv files.
        paths: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_seed_list(s: &str) -> Result<Vec<u64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::new(2, format!("invalid seed `{v}` in --seeds")))
        })
        .collect()
}

fn real_main() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seeds,
            parallel,
            overrides,
        } => {
            let mut experiment = ExperimentConfig::parse_file(&config)?;
            for spec in &overrides {
                experiment.apply_override(spec)?;
            }
            if let Some(s) = seeds {
                experiment.seeds = parse_seed_list(&s)?;
            }
            if let Some(p) = parallel {
                experiment.parallel = Some(p);
            }
            experiment.check()?;
            let out_dir = out
                .or_else(|| experiment.out.clone())
                .unwrap_or_else(|| PathBuf::from("."));
            commands::cmd_run(&experiment, &out_dir)
        }
        Command::Calibrate {
            kind,
            config,
            out,
            overrides,
        } => {
            let mut experiment = match config {
                Some(path) => ExperimentConfig::parse_file(&path)?,
                None => ExperimentConfig::default(),
            };
            for spec in &overrides {
                experiment.apply_override(spec)?;
            }
            let out_dir = out
                .or_else(|| experiment.out.clone())
                .unwrap_or_else(|| PathBuf::from("."));
            commands::cmd_calibrate(&kind, &experiment, &out_dir)
        }
        Command::Summarize { paths, out } => {
            let out_dir = out.unwrap_or_else(|| PathBuf::from("."));
            commands::cmd_summarize(&paths, &out_dir)
        }
    }
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
