//! The `polemos` command line: one subcommand per pipeline stage.
//!
//! Every subcommand resolves its settings from flags, then the optional
//! TOML config file, then defaults; writes its artifacts atomically; and
//! records a run manifest under the runs directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "polemos", version, about = "Violence detection and categorization for historical corpora")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, env = "POLEMOS_CONFIG")]
    pub config: Option<PathBuf>,
    /// Store database file [default: polemos.sqlite].
    #[arg(long, global = true)]
    pub db: Option<PathBuf>,
    /// Directory holding trained models [default: models].
    #[arg(long, global = true)]
    pub models_dir: Option<PathBuf>,
    /// Directory for default output paths [default: artifacts].
    #[arg(long, global = true)]
    pub artifacts_dir: Option<PathBuf>,
    /// Directory for run manifests [default: runs].
    #[arg(long, global = true)]
    pub runs_dir: Option<PathBuf>,
    /// Directory of `<task>.tsv` label registries overriding the bundled ones.
    #[arg(long, global = true)]
    pub registries_dir: Option<PathBuf>,
    /// Log more (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the bundled synthetic corpus and curated events.
    MakeFixture(MakeFixtureArgs),
    /// Parse corpus files, align curated events and load both into the store.
    Ingest(IngestArgs),
    /// Build a held-out (detection) or stratified (categorization) split.
    BuildDataset(BuildDatasetArgs),
    /// Expand the training split with paraphrases.
    Augment(AugmentArgs),
    /// Train a classifier on a dataset's training split.
    Train(TrainArgs),
    /// Score predictions against gold labels.
    Evaluate(EvaluateArgs),
    /// Render several scored runs side by side with significance tests.
    Report(ReportArgs),
    /// Annotate stored passages with a trained model (same job as POST /jobs).
    Annotate(AnnotateArgs),
    /// Label a dataset split with the zero-shot chat annotator.
    AnnotateZeroshot(ZeroShotArgs),
    /// Run the HTTP review service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MakeFixtureArgs {
    /// Output directory (gets corpus/ and events.jsonl).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// Corpus files or directories: `.txt` with `@@ <work> <ch>.<sec>` headers, or passages `.jsonl`.
    #[arg(long, required = true, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    /// Curated events JSONL.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Alignment report path [default: <artifacts>/alignment_report.json].
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Detect,
    Level,
    Context,
    Motive,
    Consequence,
}

impl From<TaskArg> for polemos_core::dataset::Task {
    fn from(t: TaskArg) -> Self {
        use polemos_core::dataset::Task;
        match t {
            TaskArg::Detect => Task::Detect,
            TaskArg::Level => Task::Level,
            TaskArg::Context => Task::Context,
            TaskArg::Motive => Task::Motive,
            TaskArg::Consequence => Task::Consequence,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BuildDatasetArgs {
    #[arg(long, value_enum, default_value = "detect")]
    pub task: TaskArg,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Detection test-set size; the class mix stays 129:371 [default: 500].
    #[arg(long)]
    pub test_size: Option<usize>,
    /// Categorization training fraction [default: 0.8].
    #[arg(long)]
    pub train_frac: Option<f64>,
    /// Dataset JSONL path [default: <artifacts>/<task>_dataset.jsonl].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParaphraserArg {
    Stub,
    Llm,
}

#[derive(Debug, Clone, Args)]
pub struct AugmentArgs {
    /// Dataset JSONL from build-dataset.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Paraphrases per training original [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// Concurrent paraphrase requests [default: 4].
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Paraphrase source [default: stub].
    #[arg(long, value_enum)]
    pub paraphraser: Option<ParaphraserArg>,
    /// Chat model name for the llm paraphraser.
    #[arg(long)]
    pub llm_model: Option<String>,
    /// Response cache directory.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Output path [default: <dataset stem>_aug<k>.jsonl next to the input].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Skip training: random head on the untrained encoder.
    #[arg(long)]
    pub as_is: bool,
    #[arg(long)]
    pub backbone: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_sequence_length: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight the loss by inverse class frequency.
    #[arg(long)]
    pub class_weighting: bool,
    /// Detection decision threshold on P(violent) [default: 0.5].
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum FormatArg {
    #[default]
    Text,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Predictions JSONL: `{passage_id, label|pred, model_id?}` per line.
    #[arg(long, requires = "golds", conflicts_with_all = ["records", "model"])]
    pub preds: Option<PathBuf>,
    /// Gold JSONL: `{passage_id|source_id, gold|label}`; dataset files use their test split.
    #[arg(long)]
    pub golds: Option<PathBuf>,
    /// Scored records JSONL: `{passage_id, task, gold, pred}` per line.
    #[arg(long, conflicts_with = "model")]
    pub records: Option<PathBuf>,
    /// Model id to score on `--dataset`'s test split.
    #[arg(long, requires = "dataset")]
    pub model: Option<String>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Name for the model column when the input carries none.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
    /// Also print unweighted (macro) averages.
    #[arg(long)]
    pub macro_avg: bool,
    /// Write the report(s) as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where `--model` writes its scored records [default: <artifacts>/eval/<model>.records.jsonl].
    #[arg(long)]
    pub records_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Scored records JSONL files, one per model; the first is the McNemar reference.
    #[arg(long, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Model names, one per input [default: file stems].
    #[arg(long, num_args = 1..)]
    pub names: Vec<String>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
    /// Significance level for McNemar lines.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub model: String,
    /// Work ids to annotate [default: every work in the store].
    #[arg(long, num_args = 1..)]
    pub works: Vec<String>,
    /// Re-run even if an identical job exists.
    #[arg(long)]
    pub force: bool,
    /// Also write the model's latest prediction per matching passage as JSONL.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Stub,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct ZeroShotArgs {
    /// Detection dataset JSONL.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long, value_enum, default_value = "stub")]
    pub backend: BackendArg,
    /// Chat model name (required for the http backend unless configured).
    #[arg(long)]
    pub llm_model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Only the first N examples.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Scored records path [default: <artifacts>/zeroshot/<model>.records.jsonl].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Listen port [default: $POLEMOS_PORT or 8750].
    #[arg(long)]
    pub port: Option<u16>,
}
