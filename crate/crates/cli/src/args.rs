use std::path::PathBuf;

use auginf::gnn::{HeadConfig, HeadVariant};
use auginf::pipeline::deepwalk::DeepWalkConfig;
use auginf::pipeline::TrainConfig;
use auginf::synth::{CascadeConfig, GraphModel};
use auginf_numerics::AdagradConfig;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "auginf", version, about = "Social influence prediction with graph augmentation")]
pub struct Cli {
    /// Log more (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Generate a synthetic cascade dataset.
    Synth(SynthArgs),
    /// Train one ablation arm (and the augmentation VGAE if it needs one).
    Train(TrainArgs),
    /// Evaluate a saved model on the test split.
    Eval(EvalArgs),
    /// Train and evaluate ablation arms over several seeds.
    Ablate(AblateArgs),
    /// Vary the augmentation count or threshold for one arm.
    Sweep(SweepArgs),
    /// Re-run a command from its manifest and compare the outputs.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    SmallWorld,
    PreferentialAttachment,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "preferential-attachment")]
    pub graph: GraphKind,
    /// Lattice degree of the small-world graph.
    #[arg(long, default_value_t = 10)]
    pub degree: usize,
    /// Rewiring probability of the small-world graph.
    #[arg(long, default_value_t = 0.1)]
    pub rewire: f64,
    /// Edges per new node in the preferential-attachment graph.
    #[arg(long, default_value_t = 4)]
    pub attach: usize,
    #[arg(long, default_value_t = 300)]
    pub nodes: usize,
    #[arg(long, default_value_t = 5)]
    pub seeds_per_cascade: usize,
    /// Activation probability of the independent cascade.
    #[arg(long, default_value_t = 0.15)]
    pub p: f64,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 30)]
    pub subgraph_size: usize,
    #[arg(long, default_value_t = 0.8)]
    pub restart: f64,
    /// Target share of positive samples.
    #[arg(long, default_value_t = 0.25, conflicts_with = "natural_rate")]
    pub positive_fraction: f64,
    /// Keep the cascade's natural positive rate instead.
    #[arg(long)]
    pub natural_rate: bool,
    #[arg(long, default_value_t = 5)]
    pub per_cascade: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SynthArgs {
    pub fn cascade_config(&self) -> CascadeConfig {
        CascadeConfig {
            graph: match self.graph {
                GraphKind::SmallWorld => GraphModel::SmallWorld { k: self.degree, beta: self.rewire },
                GraphKind::PreferentialAttachment => GraphModel::PreferentialAttachment { m: self.attach },
            },
            nodes: self.nodes,
            seeds_per_cascade: self.seeds_per_cascade,
            activation_p: self.p,
            samples: self.samples,
            subgraph_size: self.subgraph_size,
            restart_p: self.restart,
            positive_fraction: (!self.natural_rate).then_some(self.positive_fraction),
            per_cascade: self.per_cascade,
            seed: self.seed,
        }
    }
}

/// Model and optimisation settings shared by the training commands.
#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Prediction head: gat or gcn.
    #[arg(long, default_value = "gat")]
    pub model: HeadVariant,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    /// Attention heads per hidden layer.
    #[arg(long, default_value_t = 8)]
    pub heads: usize,
    /// Attention heads averaged in the output layer.
    #[arg(long, default_value_t = 8)]
    pub output_heads: usize,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "128,128")]
    pub hidden: Vec<usize>,
    /// DeepWalk embedding width.
    #[arg(long, default_value_t = 64)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 10)]
    pub walks_per_node: usize,
    #[arg(long, default_value_t = 40)]
    pub walk_length: usize,
    /// Autoencoder latent width.
    #[arg(long, default_value_t = 64)]
    pub latent_dim: usize,
    /// Autoencoder hidden width.
    #[arg(long, default_value_t = 64)]
    pub gae_hidden: usize,
    /// Epochs for the VGAE and the stand-alone GAE.
    #[arg(long, default_value_t = 200)]
    pub ae_epochs: usize,
    #[arg(long, default_value_t = 0.8)]
    pub aug_threshold: f64,
    #[arg(long, default_value_t = 3)]
    pub aug_count: usize,
    /// Mini-batch size; full batch when omitted.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Skip the per-epoch loss trace.
    #[arg(long)]
    pub no_trace: bool,
}

impl ModelArgs {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            optimizer: AdagradConfig {
                learning_rate: self.lr,
                weight_decay: self.weight_decay,
                ..AdagradConfig::default()
            },
            batch_size: self.batch_size,
            head: HeadConfig {
                variant: self.model,
                hidden: self.hidden.clone(),
                heads: self.heads,
                output_heads: self.output_heads,
                dropout: self.dropout,
            },
            gae_hidden: self.gae_hidden,
            latent_dim: self.latent_dim,
            deepwalk: DeepWalkConfig {
                dim: self.embed_dim,
                walks_per_node: self.walks_per_node,
                walk_length: self.walk_length,
                ..DeepWalkConfig::default()
            },
            aug_threshold: self.aug_threshold,
            aug_count: self.aug_count,
            autoencoder_epochs: self.ae_epochs,
            trace: !self.no_trace,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub arm: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use this VGAE checkpoint instead of training one.
    #[arg(long)]
    pub vgae: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// VGAE checkpoint for test-time augmentation.
    #[arg(long)]
    pub vgae: Option<PathBuf>,
    /// Average over augmented test graphs even if the model's arm does not.
    #[arg(long)]
    pub test_aug: bool,
    #[arg(long)]
    pub aug_threshold: Option<f64>,
    #[arg(long)]
    pub aug_count: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Arms to run, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    pub arms: Vec<u8>,
    /// Number of seeds: seed, seed + 1, ...
    #[arg(long, default_value_t = 5)]
    pub runs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Count,
    Threshold,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub arm: u8,
    #[arg(long, value_enum)]
    pub vary: SweepAxis,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    pub counts: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.7,0.8,0.9")]
    pub thresholds: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the re-run outputs.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn seeds(base: u64, runs: u64) -> Vec<u64> {
    (base..base + runs).collect()
}
