//! Single-file model checkpoints.
//!
//! Layout: the 8-byte magic `FSEDCKPT`, a little-endian `u64` manifest length,
//! the UTF-8 JSON manifest, then every tensor as little-endian `f64` values in
//! row-major order at the offsets the manifest declares.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::position_table;
use crate::embedding::Vocabulary;
use crate::error::{Error, Result};
use crate::graph::ParamStore;
use crate::model::{FewShotModel, ModelBuilder};

pub const MAGIC: &[u8; 8] = b"FSEDCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Resumable position of a ChaCha8 stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RngState {
    pub seed: Vec<u8>,
    pub stream: u64,
    /// Decimal string; JSON numbers cannot hold a `u128` portably.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self { seed: rng.get_seed().to_vec(), stream: rng.get_stream(), word_pos: rng.get_word_pos().to_string() }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let seed: [u8; 32] =
            self.seed.as_slice().try_into().map_err(|_| Error::Checkpoint("rng seed must be 32 bytes".into()))?;
        let pos: u128 =
            self.word_pos.parse().map_err(|_| Error::Checkpoint(format!("bad rng word position {}", self.word_pos)))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    /// Offset into the blob, in `f64` elements.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub format_version: u32,
    pub run_config: RunConfig,
    pub iteration: usize,
    pub best_dev_f1: Option<f64>,
    pub optimizer: String,
    pub rng_states: BTreeMap<String, RngState>,
    pub vocab_tokens: Vec<String>,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub run_config: RunConfig,
    pub iteration: usize,
    pub best_dev_f1: Option<f64>,
    pub optimizer: String,
    pub rng_states: BTreeMap<String, RngState>,
    pub vocab_tokens: Vec<String>,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn capture(model: &FewShotModel, cfg: &RunConfig, iteration: usize, optimizer: &str) -> Self {
        Self {
            run_config: cfg.clone(),
            iteration,
            best_dev_f1: None,
            optimizer: optimizer.to_string(),
            rng_states: BTreeMap::new(),
            vocab_tokens: model.embedder.tokens().to_vec(),
            params: model.store.clone(),
        }
    }

    /// Rebuilds the model and overwrites every parameter with the saved one.
    pub fn restore(&self, builder: &ModelBuilder) -> Result<FewShotModel> {
        let cfg = &self.run_config;
        let word = self
            .params
            .id("embedding.word")
            .ok_or_else(|| Error::Checkpoint("missing tensor embedding.word".into()))?;
        let vocab = Vocabulary::with_matrix(self.vocab_tokens.clone(), self.params.get(word).clone())?;
        let mut model =
            builder.build(&cfg.model_family, &cfg.encoder, &vocab, position_table(&cfg.data), cfg.seed)?;
        if model.store.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model expects {}",
                self.params.len(),
                model.store.len()
            )));
        }
        for id in self.params.ids() {
            let name = self.params.name(id);
            let target = model
                .store
                .id(name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name}")))?;
            let value = self.params.get(id);
            if model.store.get(target).dim() != value.dim() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, model expects {:?}",
                    value.dim(),
                    model.store.get(target).dim()
                )));
            }
            model.store.get_mut(target).assign(value);
        }
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors = Vec::with_capacity(self.params.len());
        let mut offset = 0;
        for id in self.params.ids() {
            let (r, c) = self.params.get(id).dim();
            tensors.push(TensorEntry { name: self.params.name(id).to_string(), shape: [r, c], offset });
            offset += r * c;
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            run_config: self.run_config.clone(),
            iteration: self.iteration,
            best_dev_f1: self.best_dev_f1,
            optimizer: self.optimizer.clone(),
            rng_states: self.rng_states.clone(),
            vocab_tokens: self.vocab_tokens.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(16 + json.len() + offset * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for id in self.params.ids() {
            for x in self.params.get(id).iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let json_end = 16usize.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated manifest"))?;
        let manifest: Manifest = serde_json::from_slice(&bytes[16..json_end])
            .map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (supported: {FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        let blob = &bytes[json_end..];
        let mut params = ParamStore::new();
        for t in &manifest.tensors {
            let n = t.shape[0] * t.shape[1];
            let start = t.offset * 8;
            let end = start + n * 8;
            if end > blob.len() {
                return Err(Error::Checkpoint(format!("tensor {} extends past the end of the blob", t.name)));
            }
            let values = blob[start..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            let array = Array2::from_shape_vec((t.shape[0], t.shape[1]), values).expect("declared shape");
            if params.id(&t.name).is_some() {
                return Err(Error::Checkpoint(format!("duplicate tensor {}", t.name)));
            }
            params.add(t.name.clone(), array);
        }
        Ok(Self {
            run_config: manifest.run_config,
            iteration: manifest.iteration,
            best_dev_f1: manifest.best_dev_f1,
            optimizer: manifest.optimizer,
            rng_states: manifest.rng_states,
            vocab_tokens: manifest.vocab_tokens,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
