use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sgm_core::analysis::DEFAULT_NODES;
use sgm_core::estimators::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "sgm", version, about = "Fit, sample and analyze structural gradient models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV sample.
    Fit(FitArgs),
    /// Cross-validated predictive likelihood over a τ grid.
    Cv(CvArgs),
    /// Draw a sample and write it as CSV.
    Sample(SampleArgs),
    /// Report region margins for a parameter file.
    Feasible(FeasibleArgs),
    /// Moments, dependence measures and density grids by quadrature.
    Analyze(AnalyzeArgs),
    /// Replicated benchmark or recovery experiment.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Sgm,
    Mixm,
    Gauss,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Sgm => ModelKind::Sgm,
            ModelArg::Mixm => ModelKind::Mixm,
            ModelArg::Gauss => ModelKind::Gauss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionArg {
    Lit,
    Lattice,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// CSV sample, one row per observation.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Sgm)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = RegionArg::Lit)]
    pub region: RegionArg,
    /// Budget of the lit region, in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Lattice resolution, required with `--region lattice`.
    #[arg(long = "M")]
    pub lattice_m: Option<u32>,
    /// `standard` or `file:PATH` with one frequency per line.
    #[arg(long, default_value = "standard")]
    pub freqs: String,
    /// Use the data as given (unit cube for SGM/MixM, standardized for Gauss).
    #[arg(long)]
    pub no_preprocess: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CvArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Sgm)]
    pub model: ModelArg,
    #[arg(long, default_value = "standard")]
    pub freqs: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated τ grid; 0.1, 0.2, …, 1.0 when omitted.
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// Skip per-fold standardization.
    #[arg(long)]
    pub no_preprocess: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["params", "benchmark", "dim"])))]
pub struct SampleArgs {
    /// Parameter file: `fit` output JSON, or lines `u_1 … u_m θ_u`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Draw from the five-dimensional benchmark distribution.
    #[arg(long)]
    pub benchmark: bool,
    /// Draw uniformly from the cube of this dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Model family of `--params` (sgm or mixm).
    #[arg(long, value_enum, default_value_t = ModelArg::Sgm)]
    pub model: ModelArg,
    /// Number of draws.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Omit the `x1,…,xm` header row.
    #[arg(long)]
    pub no_header: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FeasibleArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Sgm)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Lattice resolution; the smallest valid one when omitted.
    #[arg(long = "M")]
    pub lattice_m: Option<u32>,
    /// Points per axis of the Hessian scan; dimension-dependent default.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Moments,
    Correlation,
    Beta122,
    Beta123,
    Cmi,
    Fisher,
    Marginal,
    Grid,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("what").required(true).args(["table1", "params"])))]
pub struct AnalyzeArgs {
    /// Reproduce the summary table of the one-frequency examples.
    #[arg(long)]
    pub table1: bool,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelArg::Sgm)]
    pub model: ModelArg,
    /// Quantities to compute (repeat or comma-separate).
    #[arg(long = "quantity", value_enum, value_delimiter = ',')]
    pub quantities: Vec<Quantity>,
    /// One-based axis pair for `correlation` and `grid`.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
    pub pair: Vec<usize>,
    /// One-based axes for `marginal`.
    #[arg(long, value_delimiter = ',')]
    pub axes: Option<Vec<usize>>,
    /// Evaluation point for `marginal`, one value per axis.
    #[arg(long, value_delimiter = ',')]
    pub point: Option<Vec<f64>>,
    /// Grid conditioning `AXIS=VALUE` (one-based axis), repeatable.
    #[arg(long)]
    pub condition: Vec<String>,
    #[arg(long, default_value_t = 41)]
    pub resolution: usize,
    /// Write the grid as TSV here instead of embedding it in the JSON.
    #[arg(long)]
    pub grid_output: Option<PathBuf>,
    /// Gauss–Legendre nodes per axis.
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub quad_nodes: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Run the recovery experiment for `--params` instead of the benchmark.
    #[arg(long, requires = "params")]
    pub recovery: bool,
    /// True parameters for `--recovery`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    /// Training rows per replicate; 40 for the benchmark, 100 for recovery.
    #[arg(long)]
    pub n: Option<usize>,
    /// Held-out rows per benchmark replicate.
    #[arg(long, default_value_t = 10)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Budget of the coefficient tables (benchmark) or of the lit fit (recovery).
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Benchmark predictive τ grid; 0.1, 0.2, …, 1.0 when omitted.
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// Recovery region; both when omitted.
    #[arg(long, value_enum)]
    pub region: Option<RegionArg>,
    /// Recovery lattice resolution.
    #[arg(long = "M", default_value_t = 5)]
    pub lattice_m: u32,
    /// Fitted frequency set: `standard`, `file:PATH`, or for recovery `truth`.
    #[arg(long)]
    pub freqs: Option<String>,
    #[command(flatten)]
    pub common: Common,
}
