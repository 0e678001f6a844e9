//! Command-line workbench for the memory-k channel toolkit.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{load, Overrides};

#[derive(Debug, Parser)]
#[command(name = "memk", version, about = "Memory-k nanopore channel workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate channel parameters from reference/read pairs.
    Estimate(Invocation),
    /// Sample reads from a channel model.
    Simulate(Invocation),
    /// Inner-encode payload blocks to nucleotide text.
    Encode(Invocation),
    /// Decode reads of encoded blocks and dump symbol APPs.
    Decode(Invocation),
    /// Sweep BCJR-once achievable rates.
    Air(Invocation),
    /// Run end-to-end frame error rate experiments.
    Fer(Invocation),
}

#[derive(Debug, Args)]
pub struct Invocation {
    /// TOML configuration file.
    pub config: PathBuf,
    /// Memory length override.
    #[arg(long)]
    pub k: Option<usize>,
    /// Read counts, comma separated.
    #[arg(long = "m-reads", value_delimiter = ',')]
    pub m_reads: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Invocation {
    fn overrides(&self) -> Overrides {
        Overrides {
            k: self.k,
            m_reads: self.m_reads.clone(),
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Estimate(inv) => {
            let mut cfg = load::<config::EstimateConfig>(&inv.config)?;
            cfg.apply(&inv.overrides())?;
            commands::estimate(&cfg).map(drop)
        }
        Command::Simulate(inv) => {
            let mut cfg = load::<config::SimulateConfig>(&inv.config)?;
            cfg.apply(&inv.overrides())?;
            commands::simulate(&cfg)
        }
        Command::Encode(inv) => {
            let mut cfg = load::<config::EncodeConfig>(&inv.config)?;
            cfg.apply(&inv.overrides())?;
            commands::encode(&cfg)
        }
        Command::Decode(inv) => {
            let mut cfg = load::<config::DecodeConfig>(&inv.config)?;
            cfg.apply(&inv.overrides())?;
            commands::decode(&cfg)
        }
        Command::Air(inv) => {
            let mut cfg = load::<config::AirExperiment>(&inv.config)?;
            cfg.apply(&inv.overrides())?;
            commands::air(&cfg).map(drop)
        }
        Command::Fer(inv) => {
            let mut cfg = load::<config::FerExperiment>(&inv.config)?;
            cfg.apply(&inv.overrides())?;
            commands::fer(&cfg).map(drop)
        }
    }
}

/// Machine-readable error report written to stderr on failure.
pub fn error_json(err: &anyhow::Error) -> String {
    let chain: Vec<String> = err.chain().map(ToString::to_string).collect();
    serde_json::json!({ "error": err.to_string(), "chain": chain }).to_string()
}
