//! `tagforge`: ingest folksonomies, synthesize test data, sweep forgery
//! strategies over forgery rates and reshape sweep results for plotting.
//!
//! Exit codes: 0 success, 2 configuration error (including bad flags),
//! 3 data or I/O error, 4 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tagforge::ErrorClass;

#[derive(Debug, Parser)]
#[command(
    name = "tagforge",
    version,
    about = "Privacy/utility sweeps for tag forgery in folksonomies"
)]
struct Cli {
    /// Print progress to stdout.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an annotation file and write dataset statistics as JSON.
    Ingest(IngestArgs),
    /// Generate a synthetic folksonomy.
    Synth(SynthArgs),
    /// Run the privacy/utility sweep over strategies and forgery rates.
    Sweep(Box<SweepArgs>),
    /// Split a sweep CSV into one data file per figure family.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Annotation TSV with a `user<TAB>item<TAB>category` header.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Category labels, one per line.
    #[arg(long)]
    pub categories: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generator parameters, e.g. `users=200,items=2000,categories=11,per-user=100,concentration=0.3,skew=1.5`.
    #[arg(long)]
    pub synth: Option<String>,
    /// Generator seed, used when the synth spec has none.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Annotation TSV; requires `--categories`. Exclusive with `--synth`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sweep a synthetic folksonomy generated in memory.
    #[arg(long)]
    pub synth: Option<String>,
    #[arg(long)]
    pub categories: Option<PathBuf>,
    /// TMN forgery distribution, `label<TAB>weight` per line (default uniform).
    #[arg(long)]
    pub tmn_dist: Option<PathBuf>,
    /// Comma list drawn from optimized, tmn, uniform (default all three).
    #[arg(long)]
    pub strategies: Option<String>,
    /// Comma list or `start:stop:step`.
    #[arg(long)]
    pub rho_grid: Option<String>,
    /// Split seed; also the synthetic-data seed when the synth spec has none.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training fraction per user, in (0, 1). Default 0.8.
    #[arg(long)]
    pub split: Option<f64>,
    /// Comma list of V for precision at V. Default 30,50.
    #[arg(long)]
    pub top: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// tag_weighted or user_averaged.
    #[arg(long)]
    pub population_mode: Option<String>,
    /// Additive smoothing of the population profile.
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Evaluation worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write per-user outcomes as JSON lines.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub per_user_dump: Option<bool>,
    /// Candidate pool: global (union of test items) or per-user.
    #[arg(long)]
    pub pool: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Sweep CSV produced by `tagforge sweep`.
    pub sweep_csv: PathBuf,
    /// Output directory (default: the CSV's directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a, cli.verbose),
        Command::Synth(a) => commands::synth(a, cli.verbose),
        Command::Sweep(a) => commands::sweep(*a, cli.verbose),
        Command::Report(a) => commands::report(a, cli.verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tagforge: error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numeric => 4,
            })
        }
    }
}
