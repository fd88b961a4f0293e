use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lseg", version, about = "Landmark sub-sampled point-cloud instance segmentation")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "LSEG_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene with ground-truth instances
    GenScene(GenSceneArgs),
    /// Segment one scene at a single K
    Segment(SegmentArgs),
    /// Sweep K for several sampling strategies and render charts
    Sweep(SweepArgs),
    /// Score a labels CSV against a scene's ground truth
    Eval(EvalArgs),
    /// Print the header of an FSIM feature file
    FeaturesInfo(FeaturesInfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Office,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Ply,
    Csv,
}

#[derive(Debug, Args)]
pub struct GenSceneArgs {
    /// Built-in scene layout
    #[arg(long, value_enum, default_value_t = Preset::Office, conflicts_with = "spec")]
    pub preset: Preset,
    /// JSON scene description instead of a preset
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Layout and sampling seed (overrides the seed in --spec)
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output cloud
    #[arg(short, long)]
    pub output: PathBuf,
    /// Output format (default: from the file extension)
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Points per square meter on every surface
    #[arg(long, allow_hyphen_values = true)]
    pub density: Option<f64>,
    /// Also write synthetic per-point features (FSIM) here
    #[arg(long)]
    pub features_out: Option<PathBuf>,
    /// Feature dimension for --features-out
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    /// Per-point feature noise (standard deviation)
    #[arg(long, default_value_t = 0.05)]
    pub feature_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Random,
    Grid,
    GridExtension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelerArg {
    Similarity,
    Oracle,
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PropagationArg {
    Euclidean,
    Feature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CategoryMode {
    Auto,
    On,
    Off,
}

/// Flags shared by `segment` and `sweep`.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Base seed; every block and repeat seed derives from it
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid vertices for the grid sampler
    #[arg(long, default_value_t = 2048)]
    pub grid_points: usize,
    /// Initial neighbours per grid vertex
    #[arg(long, default_value_t = 1)]
    pub nmin: usize,
    /// Neighbour increment per grid round
    #[arg(long, default_value_t = 1)]
    pub nstep: usize,
    /// Initial vertex count of the grid-extension sampler
    #[arg(long, default_value_t = 128)]
    pub initial_grid: usize,
    /// Vertex multiplier per grid-extension round
    #[arg(long, default_value_t = 2)]
    pub growth_factor: usize,
    /// Landmark labeler
    #[arg(long, value_enum, default_value_t = LabelerArg::Oracle)]
    pub labeler: LabelerArg,
    /// Similarity threshold of the similarity labeler
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Link radius of the oracle labeler, meters
    #[arg(long, default_value_t = 0.15)]
    pub radius: f64,
    /// Smallest group kept by a labeler
    #[arg(long, default_value_t = 1)]
    pub min_group: usize,
    /// FSIM feature file, one row per scene point
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Space in which labels are propagated
    #[arg(long, value_enum, default_value_t = PropagationArg::Euclidean)]
    pub propagation: PropagationArg,
    /// IoU needed for a true positive
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    /// Category-aware scoring
    #[arg(long, value_enum, default_value_t = CategoryMode::Auto)]
    pub categories: CategoryMode,
    /// Block edge length, meters
    #[arg(long, default_value_t = 1.0)]
    pub block_size: f64,
    /// Block stride, meters
    #[arg(long, default_value_t = 0.5)]
    pub stride: f64,
    /// Points per resampled block
    #[arg(long, default_value_t = 4096)]
    pub block_points: usize,
    /// Jaccard ratio for merging instances across blocks
    #[arg(long, default_value_t = 0.5)]
    pub merge_threshold: f64,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Scene cloud (.ply or .csv)
    pub scene: PathBuf,
    #[arg(long, value_enum, default_value_t = StrategyArg::Random)]
    pub strategy: StrategyArg,
    /// Landmarks per block
    #[arg(long, default_value_t = 2048)]
    pub k: usize,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Labels CSV to write
    #[arg(long, default_value = "labels.csv")]
    pub labels_out: PathBuf,
    /// Single-record report CSV (skipped when the scene has no ground truth)
    #[arg(long, default_value = "report.csv")]
    pub report_out: PathBuf,
    /// Also write the scene as PLY, colored by predicted instance, with the
    /// predicted id in the gt_instance column
    #[arg(long)]
    pub export_ply: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Scene cloud (.ply or .csv)
    pub scene: PathBuf,
    /// Strictly ascending landmark counts
    #[arg(long, value_delimiter = ',', default_value = "256,512,1024,2048,4096")]
    pub k_list: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "random,grid")]
    pub strategies: Vec<StrategyArg>,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Directory for records.csv, map_vs_k.svg and seconds_vs_k.svg
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scene cloud with ground truth
    pub scene: PathBuf,
    /// Labels CSV (point_index,instance_id)
    pub labels: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
}

#[derive(Debug, Args)]
pub struct FeaturesInfoArgs {
    pub file: PathBuf,
}
