use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "spatial-bss",
    version,
    about = "Spatial blind source separation by whitened multi-kernel eigenanalysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a mixed Matérn dataset from a scenario file
    Simulate(SimulateArgs),
    /// Estimate the mixing matrix and IC scores of a dataset
    Estimate(EstimateArgs),
    /// Run a seeded replication study
    Replicate(ReplicateArgs),
    /// Eigengaps, block diagnostics and traces of a result bundle
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON (n, p, box, marginal, matern, omega, seed)
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Override the scenario seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of sites
    #[arg(long)]
    pub n: Option<usize>,
    /// Override the number of fields
    #[arg(long)]
    pub p: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input CSV with a header row
    #[arg(long, conflicts_with = "simulate")]
    pub data: Option<PathBuf>,
    /// Scenario JSON to simulate the input from instead of reading a CSV
    #[arg(long)]
    pub simulate: Option<PathBuf>,
    /// Coordinate columns, comma separated [default: x,y]
    #[arg(long, value_delimiter = ',')]
    pub coords: Option<Vec<String>>,
    /// Value columns, comma separated [default: every non-coordinate column]
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<String>>,
    /// Number of ring kernels [default: 10]
    #[arg(long)]
    pub kernels: Option<usize>,
    /// Use ring h of the bank on its own
    #[arg(long, value_name = "H")]
    pub single_kernel: Option<usize>,
    /// Apply the isometric log-ratio transform to the value columns
    #[arg(long)]
    pub ilr: bool,
    /// Standardise the values before estimation
    #[arg(long)]
    pub standardize: bool,
    /// Seed override for --simulate
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with any of the options above; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    /// Study grid JSON [default: the desk-scale grid]
    pub grid: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads [default: available cores, capped by SPATIAL_BSS_THREADS]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Use the full-scale grid (R=1000, n up to 2000, p up to 50)
    #[arg(long, conflicts_with = "grid")]
    pub full: bool,
    /// Write meta.json with the resolved grid and stop
    #[arg(long)]
    pub dry_run: bool,
    /// Fill the seconds column (timings make study.csv non-reproducible)
    #[arg(long)]
    pub record_time: bool,
    /// Override the grid's base seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of replications
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Result bundle directory written by `estimate`
    pub bundle: PathBuf,
    /// Block cuts 0=p0<p1<...<pm=p [default: split at the largest gap]
    #[arg(long, value_delimiter = ',')]
    pub blocks: Option<Vec<usize>>,
    /// True mixing matrix (headerless CSV) for block diagnostics and D
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Score table to match against the bundle's IC scores by |correlation|
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Directory for diagnose.json and abs_corr.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
}
