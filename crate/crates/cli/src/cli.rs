use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use voxanon_core::eval::{AnonymizationPolicy, ErrorUnit};
use voxanon_core::softunits::ContentMode;
use voxanon_core::{Scenario, UpsampleMode};

#[derive(Debug, Parser)]
#[command(name = "voxanon", version, about = "Speaker anonymization toolkit")]
pub struct Cli {
    /// key=value configuration file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Root seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replace source speaker embeddings with pseudo-speakers from a pool.
    AnonPool(AnonPoolArgs),
    /// McAdams-coefficient formant shifting, WAV to WAV.
    Mcadams(McAdamsArgs),
    /// F0 track of a WAV file.
    F0(F0Args),
    /// k-means over backbone features; writes centroids and unit labels.
    Kmeans(KmeansArgs),
    /// Train the soft-unit projection and codebook.
    SoftTrain(SoftTrainArgs),
    /// Content frames from backbone features with a trained codebook.
    SoftExtract(SoftExtractArgs),
    /// Frame-level vocoder input from content, F0 and a speaker embedding.
    Assemble(AssembleArgs),
    /// Vocoder loss terms for a reference/generated WAV pair.
    Losses(LossesArgs),
    /// Privacy and utility metrics for one attack scenario.
    Eval(EvalArgs),
    /// Write a small synthetic data set.
    ToyFixture(ToyFixtureArgs),
    /// Print the effective configuration.
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct AnonPoolArgs {
    /// External pool (.embd or .csv).
    #[arg(long)]
    pub pool: PathBuf,
    /// Source embeddings, one per utterance.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Seed namespace: `enroll` or `test`.
    #[arg(long, default_value = "test")]
    pub side: String,
    /// `utt_id speaker_id` lines, for the per-speaker policy.
    #[arg(long)]
    pub utt2spk: Option<PathBuf>,
    #[arg(long)]
    pub n_far: Option<usize>,
    #[arg(long)]
    pub n_avg: Option<usize>,
    #[arg(long)]
    pub policy: Option<AnonymizationPolicy>,
}

#[derive(Debug, Args)]
pub struct McAdamsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub frame_len: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Debug, Args)]
pub struct F0Args {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub f_min: Option<f64>,
    #[arg(long)]
    pub f_max: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct KmeansArgs {
    /// FEAT files, one per utterance.
    #[arg(long, num_args = 1.., required = true)]
    pub features: Vec<PathBuf>,
    /// Output FEAT file of centroids.
    #[arg(long)]
    pub centroids: PathBuf,
    /// Directory for `<stem>.units` files.
    #[arg(long)]
    pub units_dir: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SoftTrainArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub features: Vec<PathBuf>,
    /// Unit label files aligned with `--features`.
    #[arg(long, num_args = 1.., required = true)]
    pub units: Vec<PathBuf>,
    /// Codebook JSON.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-epoch mean loss, one value per line.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub num_units: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SoftExtractArgs {
    #[arg(long)]
    pub codebook: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub mode: Option<ContentMode>,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    /// Content FEAT file.
    #[arg(long)]
    pub content: PathBuf,
    /// F0 track text file.
    #[arg(long)]
    pub f0: PathBuf,
    /// Embedding store holding the target speaker.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Id of the embedding to use.
    #[arg(long)]
    pub speaker: String,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub upsample: Option<UpsampleMode>,
}

#[derive(Debug, Args)]
pub struct LossesArgs {
    /// Reference waveform x.
    #[arg(long)]
    pub real: PathBuf,
    /// Generated waveform x̂.
    #[arg(long)]
    pub fake: PathBuf,
    #[arg(long)]
    pub lambda_fm: Option<f64>,
    #[arg(long)]
    pub lambda_mel: Option<f64>,
    /// key=value report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AnonymizerKind {
    Pool,
    Identity,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scenario: Scenario,
    #[arg(long)]
    pub enroll: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub trials: PathBuf,
    /// Pool for pseudo-speaker generation.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Defaults to `identity` for OR and `pool` for OA/AA.
    #[arg(long, value_enum)]
    pub anonymizer: Option<AnonymizerKind>,
    #[arg(long)]
    pub utt2spk: Option<PathBuf>,
    /// Reference transcripts, `utt_id<TAB>text`.
    #[arg(long = "ref", requires = "hyp")]
    pub reference: Option<PathBuf>,
    /// ASR hypotheses, `utt_id<TAB>text`.
    #[arg(long, requires = "reference")]
    pub hyp: Option<PathBuf>,
    #[arg(long)]
    pub unit: Option<ErrorUnit>,
    #[arg(long)]
    pub n_far: Option<usize>,
    #[arg(long)]
    pub n_avg: Option<usize>,
    #[arg(long)]
    pub policy: Option<AnonymizationPolicy>,
    /// AA only: reuse the same pseudo-speaker seeds on both sides.
    #[arg(long)]
    pub share_pseudo: bool,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyFixtureArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub output: Option<PathBuf>,
}
