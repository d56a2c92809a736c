use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fnn_core::bounds::DEFAULT_K;
use fnn_core::mc::DEFAULT_RESAMPLES;
use fnn_core::{NoiseConfig, NoiseKind, SweepAxis};

#[derive(Debug, Parser)]
#[command(
    name = "fnn",
    version,
    about = "Full network nonlocality toolkit for the bilocal chain"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate both witnesses for one noise configuration.
    Ideal {
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Scan one noise parameter over a grid.
    Sweep {
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated grid values in [0, 1], e.g. `1,0.9,0.8`.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true, allow_negative_numbers = true)]
        grid: Vec<f64>,
    },
    /// Certify the classical bound over model families.
    Bounds {
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 200)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FamilyArg::Standard)]
        family: FamilyArg,
        /// Hidden-variable cardinality (per source for bilocal models).
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
    /// Monte Carlo experiment with bootstrap error bars.
    Mc {
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        /// Counts CSV path; the sidecar JSON goes next to it.
        #[arg(long)]
        counts: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub v1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub v2: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub hom: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Werner)]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub eta: f64,
}

impl NoiseArgs {
    pub fn config(&self) -> NoiseConfig {
        NoiseConfig {
            v1: self.v1,
            v2: self.v2,
            noise_kind: match self.noise {
                NoiseArg::Werner => NoiseKind::Werner,
                NoiseArg::Colored => NoiseKind::Colored,
            },
            hom_visibility: self.hom,
            detector_efficiency: self.eta,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Werner,
    Colored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    V1,
    V2,
    Hom,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::V1 => SweepAxis::V1,
            AxisArg::V2 => SweepAxis::V2,
            AxisArg::Hom => SweepAxis::Hom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    /// Deterministic enumeration plus both hybrid sides.
    Standard,
    Deterministic,
    Hybrid,
    Bilocal,
    /// Everything above.
    All,
}
