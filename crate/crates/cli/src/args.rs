use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const THIRD: f64 = 1.0 / 3.0;

#[derive(Debug, Parser)]
#[command(
    name = "ultradiff",
    version,
    about = "Ultrametric Cantor sets and anomalous diffusion"
)]
pub struct Cli {
    /// Master seed for stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for simulations.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file; a `<out>.manifest.json` is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Flat TOML file of `key = value` defaults; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Group,
}

#[derive(Debug, Subcommand)]
pub enum Group {
    /// Prefractal construction and dimensions.
    #[command(subcommand)]
    Cantor(CantorCmd),
    /// Valuations and the Cantor function.
    #[command(subcommand)]
    Um(UmCmd),
    /// Scaling exponents and regimes.
    #[command(subcommand)]
    Scale(ScaleCmd),
    /// Monte Carlo ensembles.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Power-law fits of MSD data.
    #[command(subcommand)]
    Fit(FitCmd),
    /// Stretched-exponential propagators.
    #[command(subcommand)]
    Prop(PropCmd),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Subcommand)]
pub enum CantorCmd {
    /// Write the prefractal intervals and gaps as CSV.
    Gen(GenArgs),
    /// Similarity and box-counting dimensions.
    Dim(DimArgs),
    /// Coverage of [0, 2 eps0] by the Minkowski sum of two prefractals.
    Sumcov(SumcovArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenArgs {
    #[arg(long, default_value_t = THIRD)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps0: f64,
    #[arg(long)]
    pub level: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DimArgs {
    #[arg(long, default_value_t = THIRD)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps0: f64,
    #[arg(long)]
    pub level: u32,
    /// Box sizes; defaults to eps0 * beta^k for k = 2 ..= level - 4.
    #[arg(long, value_delimiter = ',')]
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SumcovArgs {
    #[arg(long, default_value_t = THIRD)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps0: f64,
    #[arg(long)]
    pub level_a: u32,
    /// Defaults to `level-a`.
    #[arg(long)]
    pub level_b: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum UmCmd {
    /// Valuation of a numeric (`--t`) or exponent-form (`--delta`) infinitesimal.
    Value(ValueArgs),
    /// Generalised Cantor function.
    Cantorfn(CantorfnArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ValueArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, conflicts_with = "delta", required_unless_present = "delta")]
    pub t: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CantorfnArgs {
    #[arg(long, default_value_t = THIRD)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps0: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub x: f64,
    #[arg(long, default_value_t = 48)]
    pub depth: u32,
}

#[derive(Debug, Subcommand)]
pub enum ScaleCmd {
    /// Scale-dependent sublinear exponent and its identity check.
    Sublinear(SublinearArgs),
    /// MSD exponent and diffusion regime.
    Classify(ClassifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SublinearArgs {
    #[arg(long)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ClassifyArgs {
    #[arg(long)]
    pub s_space: f64,
    #[arg(long)]
    pub s_time: f64,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCmd {
    /// Continuous-time random walk with Pareto waiting times.
    Ctrw(CtrwArgs),
    /// Lattice walk with hierarchical crossing barriers.
    Barrier(BarrierArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CtrwArgs {
    #[arg(long)]
    pub mu: f64,
    #[arg(long, default_value_t = 100_000)]
    pub walkers: u64,
    #[arg(long, default_value_t = 1e4)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Intrinsic,
    Embedding,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BarrierArgs {
    #[arg(long, default_value_t = THIRD)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps0: f64,
    #[arg(long, default_value_t = 12)]
    pub level: u32,
    #[arg(long)]
    pub theta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub walkers: u64,
    #[arg(long, default_value_t = 10_000)]
    pub steps: u64,
    #[arg(long, value_enum, default_value_t = MetricArg::Intrinsic)]
    pub metric: MetricArg,
}

#[derive(Debug, Subcommand)]
pub enum FitCmd {
    /// Fit `msd ~ prefactor * t^exponent` to a `t,msd,stderr,n` CSV.
    Msd(FitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Power,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FitArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Power)]
    pub model: ModelArg,
    /// `last-decade`, `all`, or an inclusive range `lo:hi`.
    #[arg(long, default_value = "last-decade")]
    pub window: String,
    /// Weight points by inverse variance of `log msd`.
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Debug, Subcommand)]
pub enum PropCmd {
    /// Evaluate the propagator at a point, or dump `u,tau,W` slices with `--out`.
    Eval(EvalArgs),
    /// Finite-difference residual of the deformed heat equation.
    Residual(ResidualArgs),
    /// Second moment against `tau`.
    Msd(PropMsdArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Shape {
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.25)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Time exponent.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub nu: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: Shape,
    #[arg(long, allow_negative_numbers = true)]
    pub x: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Slice times for the CSV dump.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub taus: Vec<f64>,
    #[arg(long, default_value_t = 3.0)]
    pub u_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub du: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ResidualArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: Shape,
    #[arg(long, default_value_t = 3.0)]
    pub u_max: f64,
    #[arg(long, default_value_t = 0.5)]
    pub tau_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub du: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dtau: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PropMsdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: Shape,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4,8")]
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}
