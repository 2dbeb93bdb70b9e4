use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::model::{EncoderKind, PoolingKind};

fn parse_encoder(s: &str) -> Result<EncoderKind, String> {
    s.parse().map_err(|_| format!("valid kinds are rnn, cnn, deepset (got {s:?})"))
}

fn parse_pooling(s: &str) -> Result<PoolingKind, String> {
    s.parse().map_err(|_| format!("valid kinds are mean, max, sum (got {s:?})"))
}

#[derive(Debug, Parser)]
#[command(name = "ties", version, about = "Temporal interaction embeddings for entity integrity classification")]
pub struct Cli {
    /// key=value file supplying defaults for any long flag of the subcommand
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train multi-relation graph embeddings from an edge list
    TrainGraph(TrainGraphArgs),
    /// Train a sequence classifier and write a checkpoint
    Train(TrainArgs),
    /// Score interaction sequences with a trained checkpoint
    Infer(InferArgs),
    /// Compare encoders and hybrids against baseline scores over several splits
    Protocol(ProtocolArgs),
    /// Generate a synthetic labelled dataset with entity embeddings
    Synth(SynthArgs),
    /// Project an embedding table onto its top two principal components
    Project(ProjectArgs),
}

#[derive(Debug, Args)]
pub struct TrainGraphArgs {
    /// edge list, `source<TAB>relation<TAB>dest` per line
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.5)]
    pub margin: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// corrupted edges per positive edge
    #[arg(long, default_value_t = 4)]
    pub negatives: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// node table; relations go to `<out>.relations`
    #[arg(long)]
    pub out: PathBuf,
}

/// Inputs shared by training and evaluation.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// interaction log, `source<TAB>target<TAB>action<TAB>ts[<TAB>key=value]*`
    #[arg(long)]
    pub interactions: PathBuf,
    /// `source_id<TAB>label` with labels 0 or 1
    #[arg(long)]
    pub labels: PathBuf,
    /// source entity embedding table
    #[arg(long)]
    pub src_emb: PathBuf,
    /// target entity embedding table
    #[arg(long)]
    pub tgt_emb: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 512)]
    pub max_len: usize,
    /// width of the trainable action embeddings
    #[arg(long, default_value_t = 64)]
    pub d_act: usize,
    #[arg(long, default_value = "mean", value_parser = parse_pooling)]
    pub pooling: PoolingKind,
    #[arg(long, default_value_t = 1)]
    pub rnn_layers: usize,
    #[arg(long, default_value_t = 2)]
    pub cnn_layers: usize,
    #[arg(long, default_value_t = 5)]
    pub cnn_width: usize,
    #[arg(long, default_value_t = 64)]
    pub deepset_hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub head_hidden: usize,
    /// comma-separated misc keys appended to every step
    #[arg(long, value_delimiter = ',')]
    pub misc_keys: Vec<String>,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 0.0005)]
    pub lr: f64,
    #[arg(long, default_value_t = 1.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `auto` (negatives / positives) or a fixed positive-class weight
    #[arg(long, default_value = "auto")]
    pub pos_weight: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "rnn", value_parser = parse_encoder)]
    pub encoder: EncoderKind,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// checkpoint to initialise the parameters from
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// checkpoint directory to write
    #[arg(long)]
    pub out: PathBuf,
    /// also write the trained model's scores for the training sources
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// checkpoint directory
    #[arg(long)]
    pub model: PathBuf,
    /// interaction log to score
    #[arg(long)]
    pub interactions: PathBuf,
    /// `source_id<TAB>score` output
    #[arg(long)]
    pub out: PathBuf,
    /// also write the pooled sequence embeddings as an embedding table
    #[arg(long)]
    pub emit_embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// reference scores, `source_id<TAB>score`
    #[arg(long)]
    pub baseline_scores: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub splits: usize,
    /// `all` or a comma-separated subset of rnn, cnn, deepset
    #[arg(long, default_value = "all")]
    pub encoders: String,
    /// train-1, train-2 and test fractions
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.1,0.1")]
    pub fractions: Vec<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// text table; the JSON report goes next to it with a `.json` extension
    #[arg(long)]
    pub out_report: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub normal: usize,
    #[arg(long, default_value_t = 250)]
    pub bad: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 12)]
    pub actions: usize,
    #[arg(long, default_value_t = 40)]
    pub mean_len: usize,
    /// how much faster bad sources act
    #[arg(long, default_value_t = 10.0)]
    pub burst: f64,
    /// shared targets used by bad sources
    #[arg(long, default_value_t = 20)]
    pub farm: usize,
    #[arg(long, default_value_t = 2000)]
    pub target_pool: usize,
    /// entity embedding width
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// 0 separates the entity clusters, 1 merges them
    #[arg(long, default_value_t = 0.3)]
    pub overlap: f64,
    /// share of bad sources that behave normally
    #[arg(long, default_value_t = 0.0)]
    pub stealth: f64,
    /// directory for the interactions, labels, embeddings and baseline scores
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// embedding table (`#dim` header, `id<TAB>v1..vD`)
    #[arg(long)]
    pub embeddings: PathBuf,
    /// optional `source_id<TAB>label`, carried into the fourth column
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// `id<TAB>x<TAB>y<TAB>label` per row
    #[arg(long)]
    pub out: PathBuf,
}
