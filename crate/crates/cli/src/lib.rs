//! Command-line front end: replay call-auction order logs and derive
//! clearing, impact, liquidity-regime, response and batch statistics outputs.

mod commands;
mod error;
mod manifest;

pub use commands::run;
pub use error::CliError;
pub use manifest::RunManifest;

use std::path::PathBuf;

use auction_core::Price;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "auction", version, about = "Call-auction order book analytics")]
pub struct Cli {
    /// Output directory (created if missing).
    #[arg(long, global = true, env = "AUCTION_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for multi-file commands; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// Price grid spacing.
    #[arg(long, global = true, default_value = "0.01")]
    pub tick_size: Price,
    /// Reference price for the last clearing tie-break; defaults to the price
    /// of the last priced event in each log.
    #[arg(long, global = true)]
    pub reference_price: Option<Price>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SideArg {
    #[value(name = "B")]
    B,
    #[value(name = "S")]
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupArg {
    Latency,
    Account,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay one log, write the final book and the clearing outcome.
    Replay(ReplayArgs),
    /// Exact step impact curves of one auction.
    Impact(ImpactArgs),
    /// Averaged scaled limit-order density over one or more auctions.
    Density(DensityArgs),
    /// Constant-liquidity regime fits and per-day metrics.
    Regime(RegimeArgs),
    /// Response functions pooled over one or more logs.
    Response(ResponseArgs),
    /// Indicative price, volume and liquidity sampled during accumulation.
    Series(SeriesArgs),
    /// Batch statistics from a metrics file written by `regime`.
    Stats(StatsArgs),
    /// Generate synthetic auction days from a JSON flow configuration.
    Gen(GenArgs),
    /// Regenerate an output directory from its manifest.json.
    Rerun(RerunArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    pub log: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ImpactArgs {
    pub log: PathBuf,
    /// Restrict to one side; both when omitted.
    #[arg(long, value_enum)]
    pub side: Option<SideArg>,
    /// Scan limit in basis points of log-price distance from the auction price.
    #[arg(long, default_value_t = 200.0)]
    pub max_x: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DensityArgs {
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    /// Bin width in basis points.
    #[arg(long, default_value_t = 1.0)]
    pub dx: f64,
    #[arg(long, value_enum)]
    pub group: Option<GroupArg>,
}

#[derive(Debug, Args, Serialize)]
pub struct RegimeArgs {
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub min_points: usize,
    /// Scan limit in basis points.
    #[arg(long, default_value_t = 200.0)]
    pub max_x: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ResponseArgs {
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    /// Warm-up after the first event, in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub warmup: f64,
    /// Count cancellations of resting orders as marketable events.
    #[arg(long)]
    pub with_cancels: bool,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub bin_lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bin_hi: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SeriesArgs {
    pub log: PathBuf,
    /// Sampling interval in seconds.
    #[arg(long, default_value_t = 5.0)]
    pub interval: f64,
    #[arg(long, default_value_t = 20)]
    pub min_points: usize,
    #[arg(long, default_value_t = 200.0)]
    pub max_x: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    pub metrics: PathBuf,
    /// Zero-impact threshold on `ω^(0)`.
    #[arg(long, default_value_t = 0.01)]
    pub threshold: f64,
    /// Largest increment index in the pairwise KS table.
    #[arg(long, default_value_t = 10)]
    pub max_index: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub days: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}
