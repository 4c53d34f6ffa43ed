//! Command-line surface. Every flag documents its unit in brackets.

use std::path::PathBuf;

use augforge::metrics::MetricKey;
use augforge::search::{BUDGET_ENV, DEFAULT_BUDGET};
use augforge::strategy::Ratio;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "augforge",
    version,
    about = "Weather augmentation, robustness metrics, parameter search and training-set planning"
)]
pub struct Cli {
    /// Master seed for every random draw [unsigned integer]
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-scene work [count, >= 1; default: all CPUs]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory receiving output files [path]
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Rendering of the result printed on stdout
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply one augmentation to every scene in a directory
    #[command(allow_negative_numbers = true)]
    Augment(AugmentArgs),
    /// Render k distinct augmentations per scene from a parameter space
    #[command(allow_negative_numbers = true)]
    GenerateK(GenerateArgs),
    /// Search a parameter space for the setting with the best objective
    Search(SearchArgs),
    /// Fit the clear-vs-adverse embedding classifier
    LatentTrain(LatentTrainArgs),
    /// Mean adverse-condition probability of embedding files
    LatentScore(LatentScoreArgs),
    /// Build a training manifest: ratio, mini-batch groups, loss weights, balanced validation
    #[command(allow_negative_numbers = true)]
    Plan(PlanArgs),
    /// Stratified train/val/test split
    Split(SplitArgs),
    /// Cross-validation folds over a manifest's train split
    Folds(FoldsArgs),
    /// Score detections: mAP, mAP50, VR, FR
    EvalDet(EvalDetArgs),
    /// Score segmentation rasters: mIoU
    EvalSeg(EvalSegArgs),
    /// Result tables with improvement over a baseline from a ledger
    Report(ReportArgs),
    /// Paired significance test between two runs of a ledger
    Compare(CompareArgs),
    /// Write the procedural street-scene fixture with ground truth and predictions
    Fixture(FixtureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelName {
    Fog,
    Rain,
    #[value(name = "wet_reflection")]
    WetReflection,
    Hflip,
}

impl KernelName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fog => "fog",
            Self::Rain => "rain",
            Self::WetReflection => "wet_reflection",
            Self::Hflip => "hflip",
        }
    }
}

/// Kernel selection and parameter overrides. Unset parameters keep the
/// kernel defaults.
#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Augmentation kernel
    #[arg(long, value_enum)]
    pub kernel: Option<KernelName>,
    /// JSON augmentation spec file [path]; replaces --kernel and the parameter flags
    #[arg(long, conflicts_with = "kernel")]
    pub spec: Option<PathBuf>,
    /// Fog extinction coefficient [1/meter, >= 0]
    #[arg(long)]
    pub beta: Option<f32>,
    /// Fog atmospheric light, all channels [linear intensity, 0-1]
    #[arg(long)]
    pub airlight: Option<f32>,
    /// Fog distance used where depth is missing or <= 0 [meters]
    #[arg(long)]
    pub depth_fill: Option<f32>,
    /// Rain streak count [streaks per megapixel]
    #[arg(long)]
    pub streak_density: Option<f32>,
    /// Rain streak length [pixels]
    #[arg(long)]
    pub streak_length: Option<f32>,
    /// Rain streak tilt from vertical [degrees, -45 to 45]
    #[arg(long)]
    pub streak_angle: Option<f32>,
    /// Rain streak peak opacity [fraction, 0-1]
    #[arg(long)]
    pub streak_alpha: Option<f32>,
    /// Blur of the rain streak layer [pixels, Gaussian sigma]
    #[arg(long)]
    pub drop_blur: Option<f32>,
    /// Road darkening under rain [fraction, 0-1]
    #[arg(long)]
    pub wetness: Option<f32>,
    /// Mirror weight of the wet road at its upper edge [fraction, 0-1]
    #[arg(long)]
    pub reflectivity: Option<f32>,
    /// Blur of the reflection layer [pixels, Gaussian sigma]
    #[arg(long)]
    pub blur_sigma: Option<f32>,
    /// Reflection weight decay below the road edge [factor per pixel row, (0, 1]]
    #[arg(long)]
    pub attenuation: Option<f32>,
    /// Segmentation class treated as road [class id, repeatable]
    #[arg(long = "road-class")]
    pub road_class: Vec<u8>,
}

#[derive(Debug, Clone, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Input scene directory [path]
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory [path; default: --out-dir]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Input scene directory [path]
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Distinct augmentations per scene [count, >= 1]
    #[arg(long)]
    pub k: usize,
    /// Parameter space JSON file [path]
    #[arg(long)]
    pub space: PathBuf,
    /// Output directory [path; default: --out-dir]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchMethod {
    Grid,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveMode {
    /// Improvement of candidate metrics over baseline metrics
    MetricDelta,
    /// Mean adverse-condition probability of candidate embeddings
    LatentScore,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Parameter space JSON file [path]
    #[arg(long)]
    pub space: PathBuf,
    /// Search strategy
    #[arg(long, value_enum, default_value_t = SearchMethod::Grid)]
    pub method: SearchMethod,
    /// Grid points on each continuous axis [count, >= 1]
    #[arg(long, default_value_t = 5)]
    pub points_per_dim: usize,
    /// Random draws [count, >= 1]
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = ObjectiveMode::MetricDelta)]
    pub objective: ObjectiveMode,
    /// Metric compared by the metric-delta objective
    #[arg(long, default_value = "map")]
    pub metric: MetricKey,
    /// Baseline metric-set JSON file [path; metric-delta]
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Directory of candidate metric sets `<point key>.json` [path; metric-delta]
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Classifier JSON file [path; latent-score]
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    /// Directory of candidate embeddings `<point key>.emb` [path; latent-score]
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Evaluation cap [count]
    #[arg(long, env = BUDGET_ENV, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// List the points and their file keys without evaluating
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Args)]
pub struct LatentTrainArgs {
    /// Clear-condition embeddings [path, .emb]
    #[arg(long)]
    pub clear: PathBuf,
    /// Adverse-condition embeddings [path, .emb]
    #[arg(long)]
    pub odd: PathBuf,
    /// Initial gradient step [> 0]
    #[arg(long, default_value_t = 0.5)]
    pub learning_rate: f64,
    /// Iteration cap [count]
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    /// L2 penalty on the weights [>= 0]
    #[arg(long, default_value_t = 1e-3)]
    pub l2: f64,
    /// Stop when one step lowers the loss by less than this [nats, >= 0]
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Classifier output file [path; default: <out-dir>/classifier.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LatentScoreArgs {
    /// Classifier JSON file [path]
    #[arg(long)]
    pub classifier: PathBuf,
    /// Embedding files to score [path, .emb, repeatable]
    #[arg(long = "embeddings", required = true, num_args = 1..)]
    pub embeddings: Vec<PathBuf>,
}

/// The image universe: a scene directory or a JSON list of scene refs.
#[derive(Debug, Clone, Args)]
pub struct SceneSource {
    /// Scene directory; ids and condition tags come from the images [path]
    #[arg(long = "in", conflicts_with = "scenes")]
    pub input: Option<PathBuf>,
    /// JSON array of {id, image_ref, condition_tag} [path]
    #[arg(long)]
    pub scenes: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub source: SceneSource,
    /// Train share [fraction, 0-1]
    #[arg(long, default_value_t = 0.7)]
    pub train: f64,
    /// Validation share [fraction, 0-1]
    #[arg(long, default_value_t = 0.15)]
    pub val: f64,
    /// Test share [fraction, 0-1]
    #[arg(long, default_value_t = 0.15)]
    pub test: f64,
    /// Manifest output file [path; default: <out-dir>/split.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub source: SceneSource,
    /// Split manifest whose train entries are planned and whose val/test entries are kept [path]
    #[arg(long, conflicts_with_all = ["input", "scenes"])]
    pub split: Option<PathBuf>,
    /// Directory written by generate-k; its specs.jsonl supplies the augmentations [path]
    #[arg(long, conflicts_with = "ratio")]
    pub generated: Option<PathBuf>,
    /// Real:augmented proportion of the train split [r:a, integers]
    #[arg(long)]
    pub ratio: Option<Ratio>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Parameter space the augmentations are drawn from [path; with --ratio]
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Chance of prefixing each augmentation with a horizontal flip [probability, 0-1]
    #[arg(long)]
    pub flip_prob: Option<f64>,
    /// Group every real image with its augmentations
    #[arg(long)]
    pub minibatch: bool,
    /// Loss weight of augmented and adverse entries; clear entries get 1 - alpha [fraction, (0, 1)]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Clear-condition validation pool, directory or scene-ref JSON [path]
    #[arg(long, requires = "val_adverse")]
    pub val_clear: Option<PathBuf>,
    /// Adverse-condition validation pool, directory or scene-ref JSON [path]
    #[arg(long, requires = "val_clear")]
    pub val_adverse: Option<PathBuf>,
    /// Validation images drawn from each pool [count]
    #[arg(long, default_value_t = 0)]
    pub val_per_condition: usize,
    /// Manifest output file [path; default: <out-dir>/manifest.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FoldsArgs {
    /// Manifest JSON file [path]
    #[arg(long)]
    pub manifest: PathBuf,
    /// Number of folds [count, >= 2]
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Folds output file [path; default: <out-dir>/folds.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where an evaluation is recorded.
#[derive(Debug, Clone, Args)]
pub struct LedgerArgs {
    /// Append the result to this JSONL ledger [path]
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    /// Run id in the ledger [default: factors joined as name=level,...]
    #[arg(long)]
    pub run_id: Option<String>,
    /// Cross-validation fold of the run [index]
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    /// Test-set name the predictions were scored on
    #[arg(long)]
    pub test_set: Option<String>,
    /// Factor level of the run [name=level, repeatable]
    #[arg(long = "factor")]
    pub factors: Vec<String>,
    /// Timestamp stored with the run [RFC 3339; default: now]
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IouSchedule {
    /// 0.50 to 0.95 in steps of 0.05
    Coco,
    /// 0.50 only
    Voc,
}

#[derive(Debug, Clone, Args)]
pub struct EvalDetArgs {
    /// Predictions, one JSON detection per line [path]
    #[arg(long)]
    pub preds: PathBuf,
    /// Ground truth: JSONL of boxes with image_id, or a scene directory [path]
    #[arg(long)]
    pub gts: PathBuf,
    /// IoU thresholds averaged into mAP
    #[arg(long, value_enum, default_value_t = IouSchedule::Coco)]
    pub iou_thresholds: IouSchedule,
    /// IoU at which VR and FR count a match [fraction, (0, 1]]
    #[arg(long, default_value_t = 0.5)]
    pub match_iou: f64,
    #[command(flatten)]
    pub ledger: LedgerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalSegArgs {
    /// Directory of predicted class rasters `<id>.png` [path]
    #[arg(long)]
    pub preds: PathBuf,
    /// Directory of ground-truth rasters `<id>_seg.png` or `<id>.png` [path]
    #[arg(long)]
    pub gts: PathBuf,
    /// Class ids below this are valid [count, 1-256]
    #[arg(long, default_value_t = 256)]
    pub num_classes: usize,
    /// Ground-truth value excluded from scoring [class id]
    #[arg(long)]
    pub ignore_index: Option<u8>,
    #[command(flatten)]
    pub ledger: LedgerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// JSONL ledger [path]
    #[arg(long)]
    pub ledger: PathBuf,
    /// Factor whose level names a column [default: the run id]
    #[arg(long)]
    pub variant_factor: Option<String>,
    /// Column improvements are measured against [default: first column]
    #[arg(long)]
    pub baseline: Option<String>,
    /// Row order [comma-separated: map,map50,fr,vr,miou]
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<MetricKey>,
    /// Column order [comma-separated]
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
    /// Also write tables.txt and tables.csv to --out-dir
    #[arg(long)]
    pub write: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestName {
    Wilcoxon,
    Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlternativeName {
    /// Run A scores higher than run B
    Greater,
    /// Run A scores lower than run B
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// JSONL ledger [path]
    #[arg(long)]
    pub ledger: PathBuf,
    /// Run id A
    #[arg(long)]
    pub a: String,
    /// Run id B
    #[arg(long)]
    pub b: String,
    /// Metric compared
    #[arg(long, default_value = "map")]
    pub metric: MetricKey,
    /// Paired test
    #[arg(long, value_enum, default_value_t = TestName::Wilcoxon)]
    pub test: TestName,
    #[arg(long, value_enum, default_value_t = AlternativeName::TwoSided)]
    pub alternative: AlternativeName,
    /// Restrict to one test set
    #[arg(long)]
    pub test_set: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct FixtureArgs {
    /// Number of scenes [count, >= 1]
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Scene width [pixels, >= 16]
    #[arg(long, default_value_t = 64)]
    pub width: u32,
    /// Scene height [pixels, >= 16]
    #[arg(long, default_value_t = 64)]
    pub height: u32,
    /// Box jitter of the noisy predictions [pixels]
    #[arg(long, default_value_t = 2.0)]
    pub jitter: f64,
    /// Output directory [path; default: --out-dir]
    #[arg(long)]
    pub out: Option<PathBuf>,
}
