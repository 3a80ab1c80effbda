//! Instance encoders `v = f(E(s), a)`.
//!
//! Every architecture implements [`Encoder`] and is constructed through an
//! [`EncoderRegistry`] keyed by name (`cnn`, `lstm`, `gcn`).

mod cnn;
mod gcn;
mod lstm;

use std::fmt::Debug;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, ParamStore, Var};
use crate::registry::Registry;

pub use cnn::CnnEncoder;
pub use gcn::{normalized_adjacency, GcnEncoder};
pub use lstm::LstmEncoder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Relu => g.relu(x),
            Activation::Tanh => g.tanh(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct EncoderConfig {
    pub kind: String,
    pub output_dim: usize,
    pub kernel_sizes: Vec<usize>,
    pub filters_per_size: usize,
    pub local_window: usize,
    pub dense_layers: usize,
    pub lstm_hidden: usize,
    pub gcn_layers: usize,
    pub gcn_hidden: usize,
    pub activation: Activation,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            kind: "cnn".into(),
            output_dim: 300,
            kernel_sizes: vec![2, 3, 4, 5],
            filters_per_size: 150,
            local_window: 2,
            dense_layers: 1,
            lstm_hidden: 150,
            gcn_layers: 2,
            gcn_hidden: 300,
            activation: Activation::Relu,
            dropout: 0.5,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("outputDim", self.output_dim),
            ("filtersPerSize", self.filters_per_size),
            ("denseLayers", self.dense_layers),
            ("lstmHidden", self.lstm_hidden),
            ("gcnLayers", self.gcn_layers),
            ("gcnHidden", self.gcn_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("encoder {name} must be positive")));
        }
        if self.kernel_sizes.is_empty() || self.kernel_sizes.contains(&0) {
            return Err(Error::Config("encoder kernelSizes must be nonempty and positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// One embedded instance. `emb` may carry PAD rows beyond `len`; encoders
/// only read the first `len` rows.
#[derive(Debug, Clone, Copy)]
pub struct EncoderInput<'a> {
    pub emb: Var,
    pub len: usize,
    pub anchor: usize,
    pub heads: &'a [i64],
}

pub trait Encoder: Debug + Send + Sync {
    fn kind(&self) -> &'static str;

    fn output_dim(&self) -> usize;

    /// `1 x d` instance vector.
    fn encode(&self, g: &mut Graph, input: &EncoderInput) -> Var;
}

pub type EncoderFactory =
    fn(&EncoderConfig, usize, &mut ParamStore, &mut ChaCha8Rng) -> Result<Box<dyn Encoder>>;

pub type EncoderRegistry = Registry<EncoderFactory>;

/// Registry holding the CNN, LSTM and GCN encoders.
pub fn builtin_encoders() -> EncoderRegistry {
    let mut r = EncoderRegistry::new("encoder");
    r.register("cnn", |cfg, input_dim, store, rng| Ok(Box::new(CnnEncoder::new(cfg, input_dim, store, rng))))
        .register("lstm", |cfg, input_dim, store, rng| Ok(Box::new(LstmEncoder::new(cfg, input_dim, store, rng))))
        .register("gcn", |cfg, input_dim, store, rng| Ok(Box::new(GcnEncoder::new(cfg, input_dim, store, rng))));
    r
}

/// Glorot-uniform initialization.
pub(crate) fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}

/// Gathers the first `len` rows of `emb` unless it already has exactly `len`.
pub(crate) fn valid_rows(g: &mut Graph, emb: Var, len: usize) -> Var {
    if g.shape(emb).0 == len {
        emb
    } else {
        g.gather_rows(emb, (0..len).map(Some).collect())
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::SeedableRng;

    pub fn small_config(kind: &str) -> EncoderConfig {
        EncoderConfig {
            kind: kind.into(),
            output_dim: 5,
            kernel_sizes: vec![2, 3],
            filters_per_size: 3,
            local_window: 1,
            dense_layers: 1,
            lstm_hidden: 3,
            gcn_layers: 2,
            gcn_hidden: 4,
            activation: Activation::Tanh,
            dropout: 0.0,
        }
    }

    pub fn random_input(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    pub fn build(kind: &str, input_dim: usize, seed: u64) -> (ParamStore, Box<dyn Encoder>) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = builtin_encoders().get(kind).unwrap()(&small_config(kind), input_dim, &mut store, &mut rng).unwrap();
        (store, enc)
    }

    pub fn run(store: &ParamStore, enc: &dyn Encoder, e: &Array2<f64>, len: usize, anchor: usize, heads: &[i64]) -> Vec<f64> {
        let mut g = Graph::new(store);
        let emb = g.constant(e.clone());
        let v = enc.encode(&mut g, &EncoderInput { emb, len, anchor, heads });
        g.value(v).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use ndarray::{concatenate, Axis};

    #[test]
    fn registry_knows_three_encoders() {
        assert_eq!(builtin_encoders().names(), vec!["cnn", "gcn", "lstm"]);
        assert!(builtin_encoders().get("transformer").is_err());
    }

    #[test]
    fn padding_never_changes_output() {
        let heads = [1, -1, 1, 2];
        for kind in ["cnn", "lstm", "gcn"] {
            let (store, enc) = build(kind, 4, 11);
            let e = random_input(4, 4, 3);
            let padded = concatenate(Axis(0), &[e.view(), Array2::zeros((3, 4)).view()]).unwrap();
            let a = run(&store, enc.as_ref(), &e, 4, 2, &heads);
            let b = run(&store, enc.as_ref(), &padded, 4, 2, &heads);
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn deterministic_forward() {
        let heads = [-1, 0, 0];
        for kind in ["cnn", "lstm", "gcn"] {
            let (store, enc) = build(kind, 3, 2);
            let e = random_input(3, 3, 8);
            assert_eq!(run(&store, enc.as_ref(), &e, 3, 1, &heads), run(&store, enc.as_ref(), &e, 3, 1, &heads));
        }
    }

    #[test]
    fn output_dims_match_config() {
        let cfg = EncoderConfig::default();
        let mut rng = rand::SeedableRng::seed_from_u64(0);
        for kind in ["cnn", "lstm", "gcn"] {
            let c = EncoderConfig { kind: kind.into(), ..cfg.clone() };
            let mut st = ParamStore::new();
            let enc = builtin_encoders().get(kind).unwrap()(&c, 8, &mut st, &mut rng).unwrap();
            assert_eq!(enc.output_dim(), 300, "{kind}");
        }
    }
}
