//! The `unitrank` command line: simulate, train, localize, evaluate and
//! interpret. The binary is a thin wrapper around [`run`].

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

/// Fault localization over failure dependency graphs.
#[derive(Debug, Parser)]
#[command(name = "unitrank", version)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Model checkpoint file.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Producer {
    Dejavu,
    #[value(name = "rw_metric", alias = "rw-metric")]
    RwMetric,
    #[value(name = "rw_fi", alias = "rw-fi")]
    RwFi,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Full model against each ablation, over several seeds.
    Ablation,
    /// Retrain with a fraction of FDG edges removed.
    Edges,
    /// Retrain on a chronological prefix of the training set.
    Fraction,
    /// Evaluate the checkpoint separately on seen and unseen test failures.
    Generalization,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate,
    /// Train the localizer and write a checkpoint plus training log.
    Train,
    /// Rank the units of one failure.
    Localize {
        #[arg(long)]
        failure: String,
        /// Rows shown in the table.
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Evaluate a producer on the test split.
    Evaluate {
        #[arg(long, value_enum, default_value = "dejavu")]
        producer: Producer,
    },
    /// Fit per-class surrogate trees and write the rules.
    InterpretGlobal,
    /// Retrieve the training failures most similar to one failure.
    InterpretLocal {
        #[arg(long)]
        failure: String,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Retraining experiments.
    Experiment {
        #[arg(value_enum)]
        kind: Experiment,
        /// Comma-separated fractions for `edges` and `fraction`.
        #[arg(long, value_delimiter = ',')]
        fraction: Vec<f64>,
        /// Seeds or repeats per setting.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Print the resolved configuration.
    Config,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.paths.out = out.clone();
    }
    if let Some(d) = &cli.dataset {
        cfg.paths.dataset = d.clone();
    }
    if let Some(c) = &cli.checkpoint {
        cfg.paths.checkpoint = c.clone();
    }
    Ok(cfg.resolve())
}

/// Executes one parsed command line, writing tables and summaries to `w`.
pub fn run(cli: Cli, w: &mut dyn Write) -> Result<()> {
    let cfg = resolve(&cli)?;
    log::info!("resolved config (seed {}):\n{}", cfg.seed, cfg.to_toml()?);
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, w),
        Command::Train => commands::train(&cfg, w),
        Command::Localize { failure, k } => commands::localize(&cfg, &failure, k, w),
        Command::Evaluate { producer } => commands::evaluate(&cfg, producer, w),
        Command::InterpretGlobal => commands::interpret_global(&cfg, w),
        Command::InterpretLocal { failure, k } => commands::interpret_local(&cfg, &failure, k, w),
        Command::Experiment { kind, fraction, repeats } => commands::experiment(&cfg, kind, &fraction, repeats, w),
        Command::Config => {
            write!(w, "{}", cfg.to_toml()?)?;
            Ok(())
        }
    }
}
