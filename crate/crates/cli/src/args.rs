use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fsed_core::config::RunConfig;
use fsed_core::corpus::{SplitName, SplitUnit};
use fsed_core::encoders::Activation;
use fsed_core::losses::{InterMode, ScalingMode};

#[derive(Debug, Parser)]
#[command(name = "fsed", version, about = "Few-shot event detection toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and split a corpus; write the split manifest and corpus stats.
    PrepareData(RunArgs),
    /// Generate a synthetic corpus, embeddings and a starter run config.
    Synth(SynthArgs),
    /// Train one model; writes metrics.csv and checkpoints.
    Train(RunArgs),
    /// Evaluate a checkpoint on a split side.
    Evaluate(EvalArgs),
    /// Train once per (beta, gamma) pair and keep the best on dev.
    GridSearch(GridArgs),
    /// Run the family x encoder x setting x loss-variant matrix.
    Matrix(MatrixArgs),
    /// Print one sampled episode as JSON.
    InspectEpisode(InspectArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for SplitName {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => SplitName::Train,
            SplitArg::Dev => SplitName::Dev,
            SplitArg::Test => SplitName::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScalingArg {
    PairMean,
    QueryMatch,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InterArg {
    Separation,
    Literal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnitArg {
    Mention,
    Document,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Tanh,
}

/// `--config` plus flag overrides of every [`RunConfig`] field.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgsOpt,

    // data
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub position_dim: Option<usize>,
    #[arg(long)]
    pub max_sentence_length: Option<usize>,
    /// Comma-separated parent types whose subtypes form the training side.
    #[arg(long, value_delimiter = ',')]
    pub train_parents: Option<Vec<String>>,
    #[arg(long)]
    pub min_per_type: Option<usize>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long, value_enum)]
    pub split_unit: Option<UnitArg>,

    // model
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub encoder: Option<String>,
    #[arg(long)]
    pub output_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub kernel_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub filters_per_size: Option<usize>,
    #[arg(long)]
    pub local_window: Option<usize>,
    #[arg(long)]
    pub dense_layers: Option<usize>,
    #[arg(long)]
    pub lstm_hidden: Option<usize>,
    #[arg(long)]
    pub gcn_layers: Option<usize>,
    #[arg(long)]
    pub gcn_hidden: Option<usize>,
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    #[arg(long)]
    pub dropout: Option<f64>,

    // episodes
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub queries_per_class: Option<usize>,
    /// Positive classes drawn per training iteration; 0 uses every type.
    #[arg(long)]
    pub class_pool_size: Option<usize>,

    // loss
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub scaling: Option<ScalingArg>,
    #[arg(long, value_enum)]
    pub inter_mode: Option<InterArg>,
    /// Train without the auxiliary terms.
    #[arg(long)]
    pub no_aux: bool,
    /// Leave the NULL cluster out of the auxiliary terms.
    #[arg(long)]
    pub exclude_null: bool,

    // optimization
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub force_optimizer: bool,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub decay_every: Option<usize>,
    #[arg(long)]
    pub decay_factor: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub no_clip: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Optional output flags; flattened where a config is resolved.
#[derive(Debug, Clone, Default, Args)]
pub struct OutArgsOpt {
    /// Output root (default: $FEWSHOT_ED_OUT, else ./fsed-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run directory name under the output root.
    #[arg(long)]
    pub name: Option<String>,
}

impl RunArgs {
    /// Applies every given flag on top of `cfg`.
    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        let d = &mut cfg.data;
        if let Some(p) = &self.corpus {
            d.corpus = Some(p.clone());
        }
        if let Some(p) = &self.embeddings {
            d.embeddings = Some(p.clone());
        }
        set!(d.embedding_dim, self.embedding_dim);
        set!(d.position_dim, self.position_dim);
        set!(d.max_sentence_length, self.max_sentence_length);
        if let Some(p) = &self.train_parents {
            d.split.train_parent_types = p.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        }
        set!(d.split.min_per_type, self.min_per_type);
        set!(d.split.seed, self.split_seed);
        if let Some(u) = self.split_unit {
            d.split.unit = match u {
                UnitArg::Mention => SplitUnit::Mention,
                UnitArg::Document => SplitUnit::Document,
            };
        }

        set!(cfg.model_family, self.family);
        let e = &mut cfg.encoder;
        set!(e.kind, self.encoder);
        set!(e.output_dim, self.output_dim);
        set!(e.kernel_sizes, self.kernel_sizes);
        set!(e.filters_per_size, self.filters_per_size);
        set!(e.local_window, self.local_window);
        set!(e.dense_layers, self.dense_layers);
        set!(e.lstm_hidden, self.lstm_hidden);
        set!(e.gcn_layers, self.gcn_layers);
        set!(e.gcn_hidden, self.gcn_hidden);
        set!(e.dropout, self.dropout);
        if let Some(a) = self.activation {
            e.activation = match a {
                ActivationArg::Relu => Activation::Relu,
                ActivationArg::Tanh => Activation::Tanh,
            };
        }

        let s = &mut cfg.sampler;
        set!(s.n, self.n);
        set!(s.k, self.k);
        set!(s.queries_per_class, self.queries_per_class);
        if let Some(p) = self.class_pool_size {
            s.class_pool_size = (p > 0).then_some(p);
        }

        let l = &mut cfg.loss;
        set!(l.beta, self.beta);
        set!(l.gamma, self.gamma);
        if let Some(m) = self.scaling {
            l.scaling = match m {
                ScalingArg::PairMean => ScalingMode::PairMean,
                ScalingArg::QueryMatch => ScalingMode::QueryMatch,
            };
        }
        if let Some(m) = self.inter_mode {
            l.inter_mode = match m {
                InterArg::Separation => InterMode::Separation,
                InterArg::Literal => InterMode::Literal,
            };
        }
        if self.no_aux {
            l.auxiliary = false;
        }
        if self.exclude_null {
            l.include_null = false;
        }

        if let Some(o) = &self.optimizer {
            cfg.optimizer = Some(o.to_lowercase());
        }
        if self.force_optimizer {
            cfg.force_optimizer = true;
        }
        set!(cfg.initial_lr, self.lr);
        set!(cfg.decay_every, self.decay_every);
        set!(cfg.decay_factor, self.decay_factor);
        set!(cfg.iterations, self.iterations);
        set!(cfg.eval_every, self.eval_every);
        set!(cfg.eval_episodes, self.eval_episodes);
        if let Some(c) = self.clip_norm {
            cfg.clip_norm = Some(c);
        }
        if self.no_clip {
            cfg.clip_norm = None;
        }
        set!(cfg.seed, self.seed);
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// JSON synthetic spec; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgsOpt,
    #[arg(long)]
    pub num_types: Option<usize>,
    #[arg(long)]
    pub types_per_parent: Option<usize>,
    #[arg(long)]
    pub train_parents: Option<usize>,
    #[arg(long)]
    pub mentions_per_type: Option<usize>,
    #[arg(long)]
    pub vocab_per_type: Option<usize>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub distractor_sentences: Option<usize>,
    /// Use the ACE-2005 type inventory with uneven counts.
    #[arg(long)]
    pub ace_like: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Corpus to evaluate on instead of the one recorded in the checkpoint.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Semicolon-separated `beta,gamma` pairs (default: {0,.1,.2,.3}^2).
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',', default_value = "proto,proto_att,relation,matching")]
    pub families: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "cnn,lstm,gcn")]
    pub encoders: Vec<String>,
    /// `NxK` settings, e.g. `5x5,10x10`.
    #[arg(long, value_delimiter = ',', default_value = "5x5,10x10")]
    pub settings: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "original,inter,intra,both")]
    pub losses: Vec<String>,
    /// Keep a best checkpoint for every cell.
    #[arg(long)]
    pub save_checkpoints: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    /// Index of the episode in the seeded stream.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
}
