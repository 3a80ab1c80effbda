//! Run configuration. Serialized as camelCase JSON; every field has a default
//! so partial config files are accepted.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::SplitParams;
use crate::encoders::EncoderConfig;
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::sampler::SamplerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct DataConfig {
    /// JSON-Lines corpus.
    pub corpus: Option<PathBuf>,
    /// Pretrained embedding text file; random vectors when absent.
    pub embeddings: Option<PathBuf>,
    pub embedding_dim: usize,
    pub position_dim: usize,
    pub max_sentence_length: usize,
    pub split: SplitParams,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            embeddings: None,
            embedding_dim: 300,
            position_dim: 50,
            max_sentence_length: 80,
            split: SplitParams::ace(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct RunConfig {
    pub model_family: String,
    pub encoder: EncoderConfig,
    /// `sampler.seed` is ignored; episode streams are derived from `seed`.
    pub sampler: SamplerConfig,
    pub loss: LossConfig,
    /// `None` picks the family's default optimizer.
    pub optimizer: Option<String>,
    /// Keep an explicitly requested optimizer even where it is known to
    /// train poorly (SGD with the relation family).
    pub force_optimizer: bool,
    pub initial_lr: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub iterations: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub data: DataConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model_family: "proto".into(),
            encoder: EncoderConfig::default(),
            sampler: SamplerConfig::default(),
            loss: LossConfig::default(),
            optimizer: None,
            force_optimizer: false,
            initial_lr: 0.03,
            decay_every: 500,
            decay_factor: 0.5,
            iterations: 2500,
            eval_every: 200,
            eval_episodes: 500,
            clip_norm: Some(5.0),
            seed: 0,
            data: DataConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.sampler.validate()?;
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive(self.initial_lr, "initialLr")?;
        positive(self.decay_factor, "decayFactor")?;
        if let Some(c) = self.clip_norm {
            positive(c, "clipNorm")?;
        }
        for (v, name) in [
            (self.decay_every, "decayEvery"),
            (self.eval_every, "evalEvery"),
            (self.eval_episodes, "evalEpisodes"),
            (self.data.embedding_dim, "data.embeddingDim"),
            (self.data.position_dim, "data.positionDim"),
            (self.data.max_sentence_length, "data.maxSentenceLength"),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        for (v, name) in [(self.loss.beta, "loss.beta"), (self.loss.gamma, "loss.gamma")] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// Independent 64-bit seed for stream `salt` of a run (splitmix64 finalizer).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Salts for [`derive_seed`], one per random stream of a run.
pub mod streams {
    pub const TRAIN_EPISODES: u64 = 1;
    pub const DROPOUT: u64 = 2;
    pub const DEV_EPISODES: u64 = 3;
    pub const TEST_EPISODES: u64 = 4;
    pub const VOCAB: u64 = 5;
}
