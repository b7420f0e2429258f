//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{GridAxis, MethodName};

#[derive(Parser)]
#[command(
    name = "nested-krig",
    version,
    about = "Kriging predictor aggregation: exact conditioning, variance-based and nested \
             aggregation, sampling of the aggregated process, error reports and \
             (non-)consistency experiments. All outputs are plot-ready CSV; identical \
             configuration and seed give byte-identical files. NESTED_KRIG_THREADS caps \
             worker parallelism (0 = auto)."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Predict over a grid with the chosen aggregation method
    Predict(PredictArgs),
    /// Draw sample paths of the aggregated process over a grid
    Sample(SampleArgs),
    /// Emit the five-point reference figures: sample paths, predictions,
    /// error bounds and the modified-covariance grids
    #[command(name = "demo-figure1")]
    DemoFigure1(DemoArgs),
    /// Pairwise comparison of the original and aggregated covariances
    #[command(name = "covariance-report")]
    CovarianceReport(ReportArgs),
    /// Per-point error gaps against the full model with their bounds
    #[command(name = "bounds-report")]
    BoundsReport(ReportArgs),
    /// Sup exact MSE of the nested aggregator over densifying designs
    Consistency(ConsistencyArgs),
    /// Exact MSE of a variance-based method on the adversarial clustered
    /// design, against the nested and full models
    Nonconsistency(NonconsistencyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    SquaredExponential,
    Matern12,
    Matern32,
    Matern52,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    /// Consecutive index blocks of balanced sizes
    Contiguous,
    /// Seeded shuffle, then balanced blocks
    Random,
    /// Seeded centers, rows assigned to the nearest center
    NearestCenters,
}

/// Flags shared by the data-driven subcommands; each one may also come from
/// the JSON config, with flags winning.
#[derive(Args, Debug)]
pub struct CommonArgs {
    /// JSON run configuration (strict: unknown keys are rejected)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV: header row, coordinate columns, then one value column
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Covariance family [default: matern32]
    #[arg(long)]
    pub kernel: Option<FamilyArg>,
    /// Process variance k(x,x) [default: 1.0]
    #[arg(long)]
    pub variance: Option<f64>,
    /// Lengthscale: one value (isotropic) or one per dimension [default: 0.2]
    #[arg(long, value_delimiter = ',')]
    pub lengthscale: Option<Vec<f64>>,
    /// Number of groups [default: ceil(sqrt(n))]
    #[arg(long)]
    pub groups: Option<usize>,
    /// Partition strategy [default: contiguous]
    #[arg(long)]
    pub partition: Option<StrategyArg>,
    /// Seed for partitioning and sampling [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evaluation grid axis as min,max,count; repeat once per dimension
    /// [default: data bounding box, 101 points per axis]
    #[arg(long)]
    pub grid: Vec<GridAxis>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Aggregation method [default: nested]
    #[arg(long)]
    pub method: Option<MethodName>,
    /// Output CSV path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add per-submodel mean and variance columns
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of sample paths
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Condition the process on the observed values
    #[arg(long)]
    pub conditional: bool,
    /// Output CSV path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    /// Output directory for the emitted CSV files
    #[arg(long)]
    pub out: PathBuf,
    /// Sample paths per panel
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid resolution over [0, 1]
    #[arg(long, default_value_t = 101)]
    pub grid_count: usize,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output CSV path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConsistencyArgs {
    /// Design sizes, comma separated and strictly increasing
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Partition strategy [default: random]
    #[arg(long)]
    pub partition: Option<StrategyArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Covariance family [default: matern32]
    #[arg(long)]
    pub kernel: Option<FamilyArg>,
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
    #[arg(long, default_value_t = 0.2)]
    pub lengthscale: f64,
    /// Evaluation grid resolution over [0, 1]
    #[arg(long, default_value_t = 101)]
    pub grid_count: usize,
    /// Output CSV path
    #[arg(long, required = true)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct NonconsistencyArgs {
    /// Variance-based method under test (poe, gpoe, bcm, rbcm)
    #[arg(long, required = true)]
    pub method: MethodName,
    /// Covariance family; must qualify for the construction [default: matern32]
    #[arg(long)]
    pub kernel: Option<FamilyArg>,
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
    #[arg(long, default_value_t = 0.15)]
    pub lengthscale: f64,
    /// Prediction point kept clear of the space-filling sequence
    #[arg(long, default_value_t = 0.2)]
    pub x0: f64,
    /// Anchor of the accumulation ball
    #[arg(long, default_value_t = 0.8)]
    pub xbar: f64,
    /// Radius of the accumulation ball
    #[arg(long, default_value_t = 0.1)]
    pub r: f64,
    /// Exponent of the exclusion-radius schedule n^(-e)
    #[arg(long, default_value_t = 0.5)]
    pub delta_exponent: f64,
    /// Design sizes, comma separated and strictly increasing
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Output CSV path
    #[arg(long, required = true)]
    pub out: PathBuf,
}
