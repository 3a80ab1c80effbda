//! Episode objective: query log-likelihood plus two auxiliary terms computed
//! on the support set alone.
//!
//! * query: mean of `-log P(y = gold | x, S)` over the episode's queries.
//! * intra: `sum_i sum_{k<j} mse(v_i^j, v_i^k)`, pulling same-class support
//!   vectors together (`mse` averages over dimensions).
//! * inter: penalizes cosine similarity between class prototypes.
//!
//! `total = query + beta * intra_scaled + gamma * inter_scaled`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::graph::{Graph, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InterMode {
    /// Mean over pairs of `(1 + cos) / 2`; minimized by anti-aligned prototypes.
    #[default]
    Separation,
    /// `1 - sum_{i<j} cos(c_i, c_j)` taken as written.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScalingMode {
    /// Divide each auxiliary term by its pair count.
    #[default]
    PairMean,
    /// Pair-mean, then rescale by the gradient-stopped ratio `query / aux`.
    QueryMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LossConfig {
    pub beta: f64,
    pub gamma: f64,
    pub scaling: ScalingMode,
    pub inter_mode: InterMode,
    /// Whether the NULL cluster takes part in the auxiliary terms.
    pub include_null: bool,
    /// When false the auxiliary terms are not computed at all.
    pub auxiliary: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            gamma: 0.1,
            scaling: ScalingMode::PairMean,
            inter_mode: InterMode::Separation,
            include_null: true,
            auxiliary: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LossBreakdown {
    pub query: f64,
    pub intra: f64,
    pub inter: f64,
    pub intra_scaled: f64,
    pub inter_scaled: f64,
    pub total: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl LossBreakdown {
    pub fn recomposed_total(&self) -> f64 {
        self.query + self.beta * self.intra_scaled + self.gamma * self.inter_scaled
    }
}

/// An auxiliary term together with the number of pairs it sums over.
#[derive(Debug, Clone, Copy)]
pub struct PairTerm {
    pub value: Var,
    pub pairs: usize,
}

/// Mean negative log-likelihood of `gold` under `softmax(logits)` rows.
pub fn query_loss(g: &mut Graph, logits: Var, gold: &[usize]) -> Var {
    assert_eq!(g.shape(logits).0, gold.len(), "one gold label per query row");
    let logp = g.log_softmax_rows(logits);
    let picked = g.pick(logp, gold.iter().enumerate().map(|(r, &c)| (r, c)).collect());
    let mean = g.mean_all(picked);
    g.neg(mean)
}

/// Sum over classes and unordered pairs of the dimension-averaged squared
/// difference between support vectors.
pub fn intra_loss(g: &mut Graph, support: &[Var]) -> PairTerm {
    let mut terms = Vec::new();
    let mut pairs = 0;
    for &class in support {
        let (k, d) = g.shape(class);
        if k < 2 {
            continue;
        }
        let n = k * (k - 1) / 2;
        let mut diff = Array2::zeros((n, k));
        let mut row = 0;
        for a in 0..k {
            for b in a + 1..k {
                diff[[row, b]] = 1.0;
                diff[[row, a]] = -1.0;
                row += 1;
            }
        }
        let dm = g.constant(diff);
        let deltas = g.matmul(dm, class);
        let sq = g.square(deltas);
        let s = g.sum_all(sq);
        terms.push(g.scale(s, 1.0 / d as f64));
        pairs += n;
    }
    let value = sum_terms(g, &terms);
    PairTerm { value, pairs }
}

/// Pairwise prototype cosine penalty; see [`InterMode`].
pub fn inter_loss(g: &mut Graph, prototypes: Var, mode: InterMode) -> PairTerm {
    let m = g.shape(prototypes).0;
    if m < 2 {
        return PairTerm { value: g.scalar_constant(0.0), pairs: 0 };
    }
    let unit = g.row_normalize(prototypes);
    let ut = g.transpose(unit);
    let cos = g.matmul(unit, ut);
    let entries: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let pairs = entries.len();
    let picked = g.pick(cos, entries);
    let value = match mode {
        InterMode::Separation => {
            let mean = g.mean_all(picked);
            let half = g.scale(mean, 0.5);
            let offset = g.scalar_constant(0.5);
            g.add(offset, half)
        }
        InterMode::Literal => {
            let s = g.sum_all(picked);
            let neg = g.neg(s);
            let one = g.scalar_constant(1.0);
            g.add(one, neg)
        }
    };
    PairTerm { value, pairs }
}

fn sum_terms(g: &mut Graph, terms: &[Var]) -> Var {
    match terms.split_first() {
        None => g.scalar_constant(0.0),
        Some((&first, rest)) => rest.iter().fold(first, |acc, &t| g.add(acc, t)),
    }
}

/// Builds `total` on the graph and reports every component.
pub fn combine(g: &mut Graph, query: Var, intra: Option<PairTerm>, inter: Option<(PairTerm, InterMode)>, cfg: &LossConfig) -> (Var, LossBreakdown) {
    let q_val = g.scalar(query);
    let mut breakdown = LossBreakdown { query: q_val, beta: cfg.beta, gamma: cfg.gamma, ..Default::default() };

    let intra_scaled = intra.map(|t| {
        breakdown.intra = g.scalar(t.value);
        let per_pair = if t.pairs > 0 { g.scale(t.value, 1.0 / t.pairs as f64) } else { t.value };
        scale_to_query(g, per_pair, q_val, cfg.scaling)
    });
    let inter_scaled = inter.map(|(t, mode)| {
        breakdown.inter = g.scalar(t.value);
        let per_pair = match mode {
            InterMode::Separation => t.value,
            InterMode::Literal if t.pairs > 0 => g.scale(t.value, 1.0 / t.pairs as f64),
            InterMode::Literal => t.value,
        };
        scale_to_query(g, per_pair, q_val, cfg.scaling)
    });

    let mut total = query;
    if let Some(s) = intra_scaled {
        breakdown.intra_scaled = g.scalar(s);
        let w = g.scale(s, cfg.beta);
        total = g.add(total, w);
    }
    if let Some(s) = inter_scaled {
        breakdown.inter_scaled = g.scalar(s);
        let w = g.scale(s, cfg.gamma);
        total = g.add(total, w);
    }
    breakdown.total = g.scalar(total);
    (total, breakdown)
}

fn scale_to_query(g: &mut Graph, aux: Var, query: f64, mode: ScalingMode) -> Var {
    match mode {
        ScalingMode::PairMean => aux,
        ScalingMode::QueryMatch => {
            let a = g.scalar(aux);
            if a == 0.0 || !a.is_finite() {
                aux
            } else {
                g.scale(aux, query / a)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ParamStore;
    use ndarray::array;

    #[test]
    fn perfect_prediction_has_zero_query_loss() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let z = g.constant(array![[0.0, -1e6, -1e6]]);
        let l = query_loss(&mut g, z, &[0]);
        assert_eq!(g.scalar(l), 0.0);
    }

    #[test]
    fn uniform_over_six_is_log_six() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let z = g.constant(Array2::zeros((1, 6)));
        let l = query_loss(&mut g, z, &[4]);
        assert!((g.scalar(l) - 6f64.ln()).abs() < 1e-15);
        assert!((g.scalar(l) - 1.7918).abs() < 1e-4);
    }

    #[test]
    fn query_loss_averages_over_batch() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let z = g.constant(array![[1.0, 0.0], [0.0, 0.0], [2.0, -1.0]]);
        let l = query_loss(&mut g, z, &[0, 1, 1]);
        let nll = |zs: [f64; 2], c: usize| -(zs[c] - (zs[0].exp() + zs[1].exp()).ln());
        let expected = (nll([1.0, 0.0], 0) + nll([0.0, 0.0], 1) + nll([2.0, -1.0], 1)) / 3.0;
        assert!((g.scalar(l) - expected).abs() < 1e-14);
    }

    #[test]
    fn intra_loss_values() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let same = g.constant(array![[0.3, 0.1], [0.3, 0.1], [0.3, 0.1]]);
        let t = intra_loss(&mut g, &[same, same]);
        assert_eq!(g.scalar(t.value), 0.0);
        assert_eq!(t.pairs, 6);
        let two = g.constant(array![[0.0, 0.0], [2.0, 0.0]]);
        let t = intra_loss(&mut g, &[two]);
        assert_eq!(g.scalar(t.value), 2.0);
        let single = g.constant(array![[1.0, 2.0]]);
        let t = intra_loss(&mut g, &[single]);
        assert_eq!((g.scalar(t.value), t.pairs), (0.0, 0));
    }

    #[test]
    fn inter_loss_values() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let same = g.constant(array![[1.0, 2.0], [1.0, 2.0]]);
        let t = inter_loss(&mut g, same, InterMode::Separation);
        assert!((g.scalar(t.value) - 1.0).abs() < 1e-15);
        let ortho = g.constant(array![[1.0, 0.0], [0.0, 3.0]]);
        let s = inter_loss(&mut g, ortho, InterMode::Separation);
        let l = inter_loss(&mut g, ortho, InterMode::Literal);
        assert_eq!(g.scalar(s.value), 0.5);
        assert_eq!(g.scalar(l.value), 1.0);
        let one = g.constant(array![[1.0, 0.0]]);
        let t = inter_loss(&mut g, one, InterMode::Separation);
        assert_eq!(g.scalar(t.value), 0.0);
    }

    #[test]
    fn zero_weights_reduce_to_query_loss() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let q = g.scalar_constant(0.75);
        let s = g.constant(array![[0.0, 1.0], [1.0, 0.0]]);
        let intra = intra_loss(&mut g, &[s]);
        let inter = inter_loss(&mut g, s, InterMode::Separation);
        let cfg = LossConfig { beta: 0.0, gamma: 0.0, ..Default::default() };
        let (total, b) = combine(&mut g, q, Some(intra), Some((inter, InterMode::Separation)), &cfg);
        assert_eq!(g.scalar(total), 0.75);
        assert_eq!(b.total, b.query);
    }

    #[test]
    fn pair_mean_combination() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let q = g.scalar_constant(1.2);
        let s = g.constant(array![[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]);
        let intra = intra_loss(&mut g, &[s]);
        let inter = inter_loss(&mut g, s, InterMode::Literal);
        let cfg = LossConfig { beta: 0.1, gamma: 0.3, ..Default::default() };
        let (_, b) = combine(&mut g, q, Some(intra), Some((inter, InterMode::Literal)), &cfg);
        assert_eq!(b.intra_scaled, b.intra / 3.0);
        assert_eq!(b.inter_scaled, b.inter / 3.0);
        assert_eq!(b.total, 1.2 + 0.1 * b.intra_scaled + 0.3 * b.inter_scaled);
        assert!((b.recomposed_total() - b.total).abs() < 1e-12);
    }

    #[test]
    fn query_match_scales_aux_to_query_magnitude() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let q = g.scalar_constant(2.0);
        let s = g.constant(array![[0.0, 1.0], [3.0, 0.0]]);
        let intra = intra_loss(&mut g, &[s]);
        let cfg = LossConfig { scaling: ScalingMode::QueryMatch, ..Default::default() };
        let (_, b) = combine(&mut g, q, Some(intra), None, &cfg);
        assert!((b.intra_scaled - 2.0).abs() < 1e-12);
    }
}
