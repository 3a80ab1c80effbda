use rand_chacha::ChaCha8Rng;

use super::{glorot, Activation, Encoder, EncoderConfig, EncoderInput};
use crate::graph::{Graph, ParamId, ParamStore, Var};
use ndarray::Array2;

/// Multi-width convolution with max pooling, concatenated with the local
/// window of embeddings around the anchor and projected by dense layers:
/// `v = act(W [p, e_{a-w..a+w}] + b)`.
#[derive(Debug)]
pub struct CnnEncoder {
    kernels: Vec<(usize, ParamId, ParamId)>,
    dense: Vec<(ParamId, ParamId)>,
    window: usize,
    input_dim: usize,
    output_dim: usize,
    activation: Activation,
}

impl CnnEncoder {
    pub fn new(cfg: &EncoderConfig, input_dim: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Self {
        let filters = cfg.filters_per_size;
        let kernels = cfg
            .kernel_sizes
            .iter()
            .map(|&k| {
                let w = store.add(format!("encoder.cnn.conv{k}.weight"), glorot(k * input_dim, filters, rng));
                let b = store.add(format!("encoder.cnn.conv{k}.bias"), Array2::zeros((1, filters)));
                (k, w, b)
            })
            .collect::<Vec<_>>();
        let mut fan_in = filters * kernels.len() + (2 * cfg.local_window + 1) * input_dim;
        let mut dense = Vec::with_capacity(cfg.dense_layers);
        for l in 0..cfg.dense_layers {
            let w = store.add(format!("encoder.cnn.dense{l}.weight"), glorot(fan_in, cfg.output_dim, rng));
            let b = store.add(format!("encoder.cnn.dense{l}.bias"), Array2::zeros((1, cfg.output_dim)));
            dense.push((w, b));
            fan_in = cfg.output_dim;
        }
        Self {
            kernels,
            dense,
            window: cfg.local_window,
            input_dim,
            output_dim: cfg.output_dim,
            activation: cfg.activation,
        }
    }
}

impl Encoder for CnnEncoder {
    fn kind(&self) -> &'static str {
        "cnn"
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn encode(&self, g: &mut Graph, input: &EncoderInput) -> Var {
        let len = input.len;
        assert_eq!(g.shape(input.emb).1, self.input_dim, "embedding width mismatch");
        let mut parts = Vec::with_capacity(self.kernels.len() + 1);
        for &(k, w, b) in &self.kernels {
            // One window per real token start; rows past the sentence end are zero.
            let rows = (0..len).map(Some).chain(std::iter::repeat_n(None, k - 1)).collect();
            let padded = g.gather_rows(input.emb, rows);
            let windows = g.unfold(padded, k);
            let wv = g.param(w);
            let bv = g.param(b);
            let conv = g.matmul(windows, wv);
            let conv = g.add(conv, bv);
            let conv = self.activation.apply(g, conv);
            parts.push(g.max_rows(conv));
        }

        let a = input.anchor as i64;
        let w = self.window as i64;
        let local_rows = (a - w..=a + w)
            .map(|i| (i >= 0 && (i as usize) < len).then_some(i as usize))
            .collect();
        let local = g.gather_rows(input.emb, local_rows);
        let local = g.reshape(local, (1, (2 * self.window + 1) * self.input_dim));
        parts.push(local);

        let mut x = g.hcat(&parts);
        for &(w, b) in &self.dense {
            let wv = g.param(w);
            let bv = g.param(b);
            let h = g.matmul(x, wv);
            let h = g.add(h, bv);
            x = self.activation.apply(g, h);
        }
        x
    }
}
