//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use iadof_core::SubsetStrategy;

use crate::config::{Overrides, Users};

#[derive(Debug, Parser)]
#[command(
    name = "iadof",
    version,
    about = "Feasibility, DoF bounds and benchmarks for linear interference alignment"
)]
pub struct Cli {
    /// JSON configuration file with keys K, M, N, d, snr_grid_db, trials, seed.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Base seed for every random component.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Record wall-clock duration in the manifest.
    #[arg(long, global = true)]
    pub timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Brute,
    MaximalTr,
    Matching,
}

impl From<Strategy> for SubsetStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Brute => SubsetStrategy::Brute,
            Strategy::MaximalTr => SubsetStrategy::MaximalTr,
            Strategy::Matching => SubsetStrategy::Matching,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide generic feasibility of a configuration.
    Check {
        #[command(flatten)]
        system: SystemArgs,
        /// Subset-condition strategy. Defaults to matching when applicable.
        #[arg(long, value_enum)]
        strategy: Option<Strategy>,
    },
    /// Largest total DoF admitted by the necessary conditions.
    Bound {
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Block matching and random-point Jacobian rank certification.
    Certify {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Minimum-leakage alignment on a random channel.
    Solve {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        leakage_tol: Option<f64>,
    },
    /// WMMSE sum-rate benchmark over an SNR grid.
    Bench {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr_grid_db: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        noise_power: Option<f64>,
        /// Start every SNR point from a fresh random point.
        #[arg(long)]
        no_warm_start: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Bound { .. } => "bound",
            Command::Certify { .. } => "certify",
            Command::Solve { .. } => "solve",
            Command::Bench { .. } => "bench",
        }
    }

    pub fn system(&self) -> &SystemArgs {
        match self {
            Command::Check { system, .. }
            | Command::Bound { system }
            | Command::Certify { system, .. }
            | Command::Solve { system, .. }
            | Command::Bench { system, .. } => system,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Number of users, or an inclusive range `a..b` for `bound`.
    #[arg(long = "K")]
    pub users: Option<Users>,
    /// Transmit antennas, one value or one per user.
    #[arg(long = "M", value_delimiter = ',')]
    pub tx: Option<Vec<usize>>,
    /// Receive antennas, one value or one per user.
    #[arg(long = "N", value_delimiter = ',')]
    pub rx: Option<Vec<usize>>,
    /// Streams, one value or one per user.
    #[arg(long = "d", value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        let sys = self.command.system();
        let (snr_grid_db, trials) = match &self.command {
            Command::Bench {
                snr_grid_db,
                trials,
                ..
            } => (snr_grid_db.clone(), *trials),
            Command::Certify { trials, .. } => (None, *trials),
            _ => (None, None),
        };
        Overrides {
            users: sys.users,
            tx: sys.tx.clone(),
            rx: sys.rx.clone(),
            d: sys.d.clone(),
            snr_grid_db,
            trials,
            seed: self.seed,
        }
    }
}
