//! Command-line front end for `photon-bell-core`: figure data, single
//! configurations, Monte Carlo histograms and run manifests.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod output;

pub use args::Cli;
pub use error::{CliError, Result};

/// Runs a parsed command line on a pool of `--threads` workers.
pub fn run(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cli.common.threads {
        builder = builder.num_threads(k as usize);
    }
    let pool = builder.build()?;
    pool.install(|| commands::dispatch(&cli.common, &cli.command))
}
