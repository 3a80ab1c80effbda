use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use super::{glorot, valid_rows, Activation, Encoder, EncoderConfig, EncoderInput};
use crate::graph::{Graph, ParamId, ParamStore, Var};

/// `D^{-1/2} (A + I) D^{-1/2}` for the undirected dependency graph of `heads`.
pub fn normalized_adjacency(heads: &[i64]) -> Array2<f64> {
    let n = heads.len();
    let mut adj = Array2::<f64>::eye(n);
    for (i, &h) in heads.iter().enumerate() {
        if h >= 0 {
            let h = h as usize;
            adj[[i, h]] = 1.0;
            adj[[h, i]] = 1.0;
        }
    }
    let inv_sqrt: Vec<f64> = adj.rows().into_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| adj[[i, j]] * inv_sqrt[i] * inv_sqrt[j])
}

/// Graph convolution over the dependency tree; the instance vector is the
/// top-layer state at the anchor.
#[derive(Debug)]
pub struct GcnEncoder {
    layers: Vec<(ParamId, ParamId)>,
    output_dim: usize,
    activation: Activation,
}

impl GcnEncoder {
    pub fn new(cfg: &EncoderConfig, input_dim: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Self {
        let mut fan_in = input_dim;
        let mut layers = Vec::with_capacity(cfg.gcn_layers);
        for l in 0..cfg.gcn_layers {
            let out = if l + 1 == cfg.gcn_layers { cfg.output_dim } else { cfg.gcn_hidden };
            let w = store.add(format!("encoder.gcn.layer{l}.weight"), glorot(fan_in, out, rng));
            let b = store.add(format!("encoder.gcn.layer{l}.bias"), Array2::zeros((1, out)));
            layers.push((w, b));
            fan_in = out;
        }
        Self { layers, output_dim: cfg.output_dim, activation: cfg.activation }
    }
}

impl Encoder for GcnEncoder {
    fn kind(&self) -> &'static str {
        "gcn"
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn encode(&self, g: &mut Graph, input: &EncoderInput) -> Var {
        let heads = &input.heads[..input.len];
        debug_assert!(crate::corpus::validate_tree(heads).is_ok(), "GCN input is not a tree");
        let adj = g.constant(normalized_adjacency(heads));
        let mut h = valid_rows(g, input.emb, input.len);
        for &(w, b) in &self.layers {
            let wv = g.param(w);
            let bv = g.param(b);
            let msg = g.matmul(adj, h);
            let z = g.matmul(msg, wv);
            let z = g.add(z, bv);
            h = self.activation.apply(g, z);
        }
        g.row(h, input.anchor)
    }
}
