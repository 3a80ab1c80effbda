use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use super::{glorot, valid_rows, Encoder, EncoderConfig, EncoderInput};
use crate::graph::{Graph, ParamId, ParamStore, Var};

#[derive(Debug, Clone, Copy)]
struct Direction {
    input: ParamId,
    recurrent: ParamId,
    bias: ParamId,
}

/// Bidirectional LSTM; the instance vector is `[h_fwd[a], h_bwd[a]]`.
/// Gate column order is input, forget, cell, output.
#[derive(Debug)]
pub struct LstmEncoder {
    forward: Direction,
    backward: Direction,
    hidden: usize,
}

impl LstmEncoder {
    pub fn new(cfg: &EncoderConfig, input_dim: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Self {
        let h = cfg.lstm_hidden;
        let mut direction = |name: &str| {
            let mut bias = Array2::zeros((1, 4 * h));
            bias.slice_mut(ndarray::s![0, h..2 * h]).fill(1.0);
            Direction {
                input: store.add(format!("encoder.lstm.{name}.input"), glorot(input_dim, 4 * h, rng)),
                recurrent: store.add(format!("encoder.lstm.{name}.recurrent"), glorot(h, 4 * h, rng)),
                bias: store.add(format!("encoder.lstm.{name}.bias"), bias),
            }
        };
        let forward = direction("forward");
        let backward = direction("backward");
        Self { forward, backward, hidden: h }
    }

    /// Runs one direction over `steps` and returns the final hidden state.
    fn run(&self, g: &mut Graph, x: Var, dir: Direction, steps: impl Iterator<Item = usize>) -> Var {
        let h_dim = self.hidden;
        let wi = g.param(dir.input);
        let wh = g.param(dir.recurrent);
        let b = g.param(dir.bias);
        let projected = g.matmul(x, wi);
        let projected = g.add(projected, b);
        let mut h = g.constant(Array2::zeros((1, h_dim)));
        let mut c = g.constant(Array2::zeros((1, h_dim)));
        for t in steps {
            let xt = g.row(projected, t);
            let rec = g.matmul(h, wh);
            let gates = g.add(xt, rec);
            let i = g.slice_cols(gates, 0, h_dim);
            let f = g.slice_cols(gates, h_dim, 2 * h_dim);
            let cell = g.slice_cols(gates, 2 * h_dim, 3 * h_dim);
            let o = g.slice_cols(gates, 3 * h_dim, 4 * h_dim);
            let i = g.sigmoid(i);
            let f = g.sigmoid(f);
            let cell = g.tanh(cell);
            let o = g.sigmoid(o);
            let keep = g.mul(f, c);
            let write = g.mul(i, cell);
            c = g.add(keep, write);
            let squashed = g.tanh(c);
            h = g.mul(o, squashed);
        }
        h
    }
}

impl Encoder for LstmEncoder {
    fn kind(&self) -> &'static str {
        "lstm"
    }

    fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    fn encode(&self, g: &mut Graph, input: &EncoderInput) -> Var {
        let x = valid_rows(g, input.emb, input.len);
        let a = input.anchor;
        let fwd = self.run(g, x, self.forward, 0..=a);
        let bwd = self.run(g, x, self.backward, (a..input.len).rev());
        g.hcat(&[fwd, bwd])
    }
}
