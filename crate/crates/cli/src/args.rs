use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "blockid", version, about = "Identify objects from symbolic descriptions")]
pub struct Cli {
    /// Root seed for synthesis and random initialisation.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Suppress informational messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic blocks-world corpus.
    Synth(SynthArgs),
    /// Fit a model to a corpus.
    Train(TrainArgs),
    /// Evaluate a model on a corpus.
    Eval(EvalArgs),
    /// Cross-validate over environments or categories.
    Cv(CvArgs),
    /// Interactive identification console.
    Identify(IdentifyArgs),
    /// Render a scene, optionally shaded by a posterior.
    Render(RenderArgs),
    /// Minimal-thickness grasp for a point cloud.
    Grasp(GraspArgs),
    /// Serve the read-only HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bfgs,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Zeros,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Env,
    Cat,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Environments per category, five comma-separated counts.
    #[arg(long, default_value = "5,5,5,5,2")]
    pub envs: String,
    #[arg(long, default_value_t = 10)]
    pub replicas: usize,
    #[arg(long, default_value_t = 5)]
    pub descriptions: usize,
    /// Standard deviation of per-replica oracle grade noise.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Also write `<env>.ppm` and `<env>.mask.pgm` rasters here.
    #[arg(long)]
    pub rasters: Option<PathBuf>,
    #[arg(long, default_value_t = 320)]
    pub width: usize,
    #[arg(long, default_value_t = 240)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Bfgs)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1e-6)]
    pub ridge: f64,
    /// Gradient infinity-norm tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Zeros)]
    pub init: InitArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Omit to evaluate the all-zero baseline.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// `env=ID` or `cat=ID`.
    #[arg(long)]
    pub filter: Option<String>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Env)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub env: String,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub env: String,
    /// Space-separated symbols; requires --model.
    #[arg(long, requires = "model")]
    pub desc: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 320)]
    pub width: usize,
    #[arg(long, default_value_t = 240)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct GraspArgs {
    /// Whitespace-separated `x y z` lines.
    #[arg(long)]
    pub points: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory with the built web console, served under `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}
