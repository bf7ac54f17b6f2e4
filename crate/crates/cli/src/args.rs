use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::output::Format;

/// Bell tests for a single photon shared by N parties without a common phase reference.
#[derive(Debug, Parser)]
#[command(name = "photon-bell", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output file (a directory for `fig3`). Without it results go to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; defaults to csv for curve data and json otherwise.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Seed for Monte Carlo commands (required there) and for optimizer starts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// S against the mean relative phase for the counting + displacement strategy (two parties).
    Fig1(Fig1Args),
    /// Maximal S and threshold efficiency against the phase width.
    Fig2(Fig2Args),
    /// Histograms of the best-pair S over random frames, one per number of pairs.
    Fig3(Fig3Args),
    /// Maximal S for one configuration.
    Smax(SmaxArgs),
    /// Threshold efficiency for one configuration.
    Eta(EtaArgs),
    /// Histogram of the best-pair S over random frames.
    ViolationDist(ViolationArgs),
    /// CHSH value of the phase-averaged two-mode state (2/3)|psi><psi| + (1/3)|00><00|.
    ChshFootnote,
    /// Full correlator table and S for a shared-amplitude strategy.
    Correlators(CorrelatorArgs),
}

#[derive(Debug, Args)]
pub struct Fig1Args {
    /// Displacement amplitude of the second setting.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.1)]
    pub r: f64,
    /// Phase widths; 0 is the static curve.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.4, 0.9, 1.5])]
    pub deltas: Vec<f64>,
    /// Points on the mean-phase grid over [0, 2pi).
    #[arg(long, default_value_t = 720)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct Fig2Args {
    #[arg(long = "n", value_delimiter = ',', default_values_t = [2usize, 4, 9])]
    pub parties: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub delta_step: f64,
    #[arg(long, default_value_t = 1.5)]
    pub delta_max: f64,
    /// Bisection tolerance on the threshold efficiency.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    /// Optimize the phase centers instead of pinning them at 0.
    #[arg(long)]
    pub free_centers: bool,
}

#[derive(Debug, Args)]
pub struct Fig3Args {
    #[arg(long = "m", value_delimiter = ',', default_values_t = [1usize, 3, 5])]
    pub pairs: Vec<usize>,
    #[arg(long, default_value_t = 0.4)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.9)]
    pub eta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long = "n", default_value_t = 2)]
    pub parties: usize,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Optimize the phase centers instead of pinning them at 0.
    #[arg(long)]
    pub free_centers: bool,
    /// Independent amplitude pair per party.
    #[arg(long)]
    pub per_party: bool,
    #[arg(long, default_value_t = 12)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct SmaxArgs {
    #[command(flatten)]
    pub opt: OptimizeArgs,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
}

#[derive(Debug, Args)]
pub struct EtaArgs {
    #[command(flatten)]
    pub opt: OptimizeArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ViolationArgs {
    #[arg(long = "n", default_value_t = 2)]
    pub parties: usize,
    #[arg(long = "m", default_value_t = 5)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0.4)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.9)]
    pub eta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    /// Amplitudes `r,r'`; optimized at zero phase centers when omitted.
    #[arg(long, value_delimiter = ',', value_name = "R,R_PRIME", allow_negative_numbers = true)]
    pub amplitudes: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct CorrelatorArgs {
    #[arg(long = "n", default_value_t = 2)]
    pub parties: usize,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub r: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.1)]
    pub r_prime: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Centers of the N-1 relative offsets (default all 0).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub centers: Option<Vec<f64>>,
}
