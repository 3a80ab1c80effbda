//! Class prototypes from support instance vectors.
//!
//! `mean`: `c_i = (1/K) sum_j v_i^j`.
//! `attention`: `c_i = sum_j alpha_ij v_i^j` with
//! `alpha_i = softmax_j(b_ij)` and `b_ij = sum(sigmoid(v_i^j * q))`, so every
//! query sees its own prototype set.

use std::fmt::Debug;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, ParamStore, Var};
use crate::registry::Registry;

pub trait PrototypeStrategy: Debug + Send + Sync {
    fn kind(&self) -> &'static str;

    /// Whether prototypes depend on the query.
    fn query_dependent(&self) -> bool;

    /// `M x d` prototypes; `support[i]` is the `K_i x d` matrix of class `i`.
    fn prototypes(&self, g: &mut Graph, support: &[Var], query: Var) -> Var;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MeanPrototypes;

#[derive(Debug, Clone, Copy, Default)]
pub struct AttentionPrototypes;

impl PrototypeStrategy for MeanPrototypes {
    fn kind(&self) -> &'static str {
        "mean"
    }

    fn query_dependent(&self) -> bool {
        false
    }

    fn prototypes(&self, g: &mut Graph, support: &[Var], _query: Var) -> Var {
        mean_prototypes(g, support)
    }
}

impl PrototypeStrategy for AttentionPrototypes {
    fn kind(&self) -> &'static str {
        "attention"
    }

    fn query_dependent(&self) -> bool {
        true
    }

    fn prototypes(&self, g: &mut Graph, support: &[Var], query: Var) -> Var {
        let rows: Vec<Var> = support.iter().map(|&s| attention_prototype(g, s, query).0).collect();
        g.vcat(&rows)
    }
}

pub fn mean_prototypes(g: &mut Graph, support: &[Var]) -> Var {
    let rows: Vec<Var> = support.iter().map(|&s| g.mean_rows(s)).collect();
    g.vcat(&rows)
}

/// Returns the `1 x d` prototype and the `1 x K` attention weights.
pub fn attention_prototype(g: &mut Graph, class_support: Var, query: Var) -> (Var, Var) {
    let prod = g.mul(class_support, query);
    let gated = g.sigmoid(prod);
    let scores = g.sum_cols(gated);
    let scores = g.transpose(scores);
    let alpha = g.softmax_rows(scores);
    (g.matmul(alpha, class_support), alpha)
}

pub type PrototypeFactory = fn() -> Box<dyn PrototypeStrategy>;

pub fn builtin_prototypes() -> Registry<PrototypeFactory> {
    let mut r: Registry<PrototypeFactory> = Registry::new("prototype strategy");
    r.register("mean", || Box::new(MeanPrototypes)).register("attention", || Box::new(AttentionPrototypes));
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrototypeMode {
    Mean,
    Attention,
}

/// Prototype vectors for one episode (or one query, in attention mode).
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    pub vectors: Array2<f64>,
    pub mode: PrototypeMode,
    /// `weights[i][j]` is the weight of support vector `j` in prototype `i`.
    pub weights: Vec<Vec<f64>>,
}

fn check_support(support: &[Array2<f64>]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::Config("no support classes".into()));
    }
    let d = support[0].ncols();
    for (i, s) in support.iter().enumerate() {
        if s.nrows() == 0 {
            return Err(Error::Config(format!("support class {i} is empty")));
        }
        if s.ncols() != d {
            return Err(Error::Config(format!("support class {i} has width {}, expected {d}", s.ncols())));
        }
    }
    Ok(())
}

/// Mean prototypes over plain matrices.
pub fn compute_mean_prototypes(support: &[Array2<f64>]) -> Result<PrototypeSet> {
    check_support(support)?;
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let vars: Vec<Var> = support.iter().map(|s| g.constant(s.clone())).collect();
    let protos = mean_prototypes(&mut g, &vars);
    let weights = support.iter().map(|s| vec![1.0 / s.nrows() as f64; s.nrows()]).collect();
    Ok(PrototypeSet { vectors: g.value(protos).clone(), mode: PrototypeMode::Mean, weights })
}

/// Query-conditioned attention prototypes over plain matrices.
pub fn compute_attention_prototypes(support: &[Array2<f64>], query: &[f64]) -> Result<PrototypeSet> {
    check_support(support)?;
    if query.len() != support[0].ncols() {
        return Err(Error::Config(format!("query width {} does not match support width {}", query.len(), support[0].ncols())));
    }
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let q = g.constant(Array2::from_shape_vec((1, query.len()), query.to_vec()).expect("row"));
    let mut rows = Vec::with_capacity(support.len());
    let mut weights = Vec::with_capacity(support.len());
    for s in support {
        let sv = g.constant(s.clone());
        let (proto, alpha) = attention_prototype(&mut g, sv, q);
        rows.push(proto);
        weights.push(g.value(alpha).iter().copied().collect());
    }
    let protos = g.vcat(&rows);
    Ok(PrototypeSet { vectors: g.value(protos).clone(), mode: PrototypeMode::Attention, weights })
}
