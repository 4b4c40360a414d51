//! `geomdon`: generate manufactured datasets, split them, train and run
//! DeepONet field models, and score or time their predictions.

mod commands;
mod config;
mod error;
mod formats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geom_deeponet::geometry::ShapeFamily;

use crate::config::{Architecture, Preset};

#[derive(Parser, Debug)]
#[command(name = "geomdon", version, about = "Field prediction on parameterized 3D geometries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a manufactured dataset.
    Gen(GenArgs),
    /// Partition a dataset into train and test ids.
    Split(SplitArgs),
    /// Train a model from a run config.
    Train(TrainArgs),
    /// Predict fields for dataset cases or for points inside a mesh.
    Predict(PredictArgs),
    /// Score predictions against a dataset.
    Eval(EvalArgs),
    /// Time predictions on synthetic clouds of several sizes.
    Bench(BenchArgs),
    /// Signed distances from a closed surface mesh.
    Sdf(SdfArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Beam,
    Cuboid,
}

impl From<FamilyArg> for ShapeFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Beam => ShapeFamily::BeamWithHole,
            FamilyArg::Cuboid => ShapeFamily::CuboidWithVoid,
        }
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    /// JSON config with family, count, min_points, max_points, c, seed.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    min_points: Option<usize>,
    #[arg(long)]
    max_points: Option<usize>,
    /// Output components per node: 1 or 4.
    #[arg(long)]
    c: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Random,
    Similarity,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    /// Shuffle seed for random mode.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// JSON run config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    architecture: Option<Architecture>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    model_seed: Option<u64>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    resample_n: Option<usize>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Continue from a training checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory; predicts every case unless `--split` is given.
    #[arg(long, conflicts_with_all = ["mesh", "params", "points"])]
    dataset: Option<PathBuf>,
    /// Restrict to the test ids of this split file.
    #[arg(long, requires = "dataset")]
    split: Option<PathBuf>,
    /// Closed surface mesh (ASCII STL or JSON) for point input.
    #[arg(long, requires_all = ["params", "points"])]
    mesh: Option<PathBuf>,
    /// Design parameters of the mesh as `{"family", "params"}`.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Points as JSON lines `[x, y, z]`.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Predictions as JSON lines.
    #[arg(long)]
    out: PathBuf,
    /// Also write one legacy VTK file per case into this directory.
    #[arg(long)]
    vtk: Option<PathBuf>,
    /// Worker threads for case-parallel prediction.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Score the test ids of this split; adds a similarity regression for
    /// similarity splits.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Output directory for report.json and report.csv.
    #[arg(long)]
    out: PathBuf,
    /// Extra percentiles to list next to the defaults.
    #[arg(long, value_delimiter = ',')]
    percentiles: Vec<f64>,
    /// Worker threads for case-parallel scoring.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    /// Node counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 1000, 10000, 50000])]
    sizes: Vec<usize>,
    /// Timed repetitions per size; the median is reported.
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SdfArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Points as JSON lines `[x, y, z]`.
    #[arg(long)]
    points: PathBuf,
    /// One signed distance per line.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Split(a) => commands::split(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
        Command::Sdf(a) => commands::sdf(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
