//! Command-line front end. Every command is deterministic given the config
//! file and the master seed; reports carry a digest of both.

mod commands;
mod config;
mod model_file;

pub use commands::{run, Outcome};
pub use config::{
    CalibrateConfig, ConcentrationConfig, ExperimentConfig, LoadedConfig, ModelSpec, OracleConfig,
    SampleConfig, StatisticSpec, TestConfig,
};
pub use model_file::{parse_model, read_model, render_model};

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "isingc", version, about = "Ising model sampling, concentration checks and independence tests")]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Print size, edge count, Dobrushin margin, γ and the gap bound.
    Validate,
    /// Exact enumeration: log partition function, moments, variance, gap.
    Oracle,
    /// Draw a sample batch.
    Sample,
    /// Variance estimate, bound, tail curve and exponent fit.
    Concentration,
    /// Run an independence tester on a batch (exit 0 product, 1 dependent).
    Test,
    /// Measure the tester sample-count constants.
    Calibrate,
    /// Write a model file from a named family.
    Generate,
}

/// Exit code for success and for a product-measure verdict.
pub const EXIT_OK: i32 = 0;
/// Exit code for a dependent verdict.
pub const EXIT_DEPENDENT: i32 = 1;
/// Exit code for any error.
pub const EXIT_ERROR: i32 = 2;

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
