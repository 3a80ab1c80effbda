//! Distance functions and the four model families built from them.
//!
//! Every distance produces logits `z_i` that are turned into a distribution
//! over episode classes by `softmax(z)`:
//!
//! * `euclidean`: `z_i = -||v - c_i||^2`
//! * `cosine`: `z_i = cos(v, c_i)` (zero vectors have cosine 0)
//! * `relation`: `z_i = MLP([v, c_i])`, a learned comparator

use std::fmt::Debug;

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::encoders::glorot;
use crate::error::{Error, Result};
use crate::graph::{Graph, ParamId, ParamStore, Var};
use crate::registry::Registry;

pub trait Distance: Debug + Send + Sync {
    fn kind(&self) -> &'static str;

    /// `1 x M` logits of `query` (`1 x d`) against `prototypes` (`M x d`).
    fn logits(&self, g: &mut Graph, query: Var, prototypes: Var) -> Var;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

#[derive(Debug, Clone, Copy, Default)]
pub struct Cosine;

/// `concat(v, c) -> affine(2d -> hidden) -> ReLU -> affine(hidden -> 1)`.
#[derive(Debug, Clone)]
pub struct RelationComparator {
    hidden: (ParamId, ParamId),
    out: (ParamId, ParamId),
}

impl Distance for Euclidean {
    fn kind(&self) -> &'static str {
        "euclidean"
    }

    fn logits(&self, g: &mut Graph, query: Var, prototypes: Var) -> Var {
        let diff = g.sub(prototypes, query);
        let sq = g.square(diff);
        let dist = g.sum_cols(sq);
        let neg = g.neg(dist);
        g.transpose(neg)
    }
}

impl Distance for Cosine {
    fn kind(&self) -> &'static str {
        "cosine"
    }

    fn logits(&self, g: &mut Graph, query: Var, prototypes: Var) -> Var {
        let q = g.row_normalize(query);
        let p = g.row_normalize(prototypes);
        let pt = g.transpose(p);
        g.matmul(q, pt)
    }
}

impl RelationComparator {
    pub fn new(dim: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Self {
        let hidden = (
            store.add("relation.hidden.weight", glorot(2 * dim, dim, rng)),
            store.add("relation.hidden.bias", Array2::zeros((1, dim))),
        );
        let out = (
            store.add("relation.out.weight", glorot(dim, 1, rng)),
            store.add("relation.out.bias", Array2::zeros((1, 1))),
        );
        Self { hidden, out }
    }

    pub fn param_ids(&self) -> [ParamId; 4] {
        [self.hidden.0, self.hidden.1, self.out.0, self.out.1]
    }
}

impl Distance for RelationComparator {
    fn kind(&self) -> &'static str {
        "relation"
    }

    fn logits(&self, g: &mut Graph, query: Var, prototypes: Var) -> Var {
        let m = g.shape(prototypes).0;
        let tiled = g.gather_rows(query, vec![Some(0); m]);
        let pairs = g.hcat(&[tiled, prototypes]);
        let w1 = g.param(self.hidden.0);
        let b1 = g.param(self.hidden.1);
        let w2 = g.param(self.out.0);
        let b2 = g.param(self.out.1);
        let h = g.matmul(pairs, w1);
        let h = g.add(h, b1);
        let h = g.relu(h);
        let s = g.matmul(h, w2);
        let s = g.add(s, b2);
        g.transpose(s)
    }
}

pub type DistanceFactory = fn(usize, &mut ParamStore, &mut ChaCha8Rng) -> Box<dyn Distance>;

pub fn builtin_distances() -> Registry<DistanceFactory> {
    let mut r: Registry<DistanceFactory> = Registry::new("distance");
    r.register("euclidean", |_, _, _| Box::new(Euclidean))
        .register("cosine", |_, _, _| Box::new(Cosine))
        .register("relation", |dim, store, rng| Box::new(RelationComparator::new(dim, store, rng)));
    r
}

/// A model family: which prototype strategy and distance it pairs, and the
/// optimizer it trains with unless told otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilySpec {
    pub name: &'static str,
    pub display: &'static str,
    pub prototype: &'static str,
    pub distance: &'static str,
    pub optimizer: &'static str,
}

pub fn builtin_families() -> Registry<FamilySpec> {
    let mut r = Registry::new("model family");
    for spec in [
        FamilySpec { name: "proto", display: "Proto", prototype: "mean", distance: "euclidean", optimizer: "sgd" },
        FamilySpec {
            name: "proto_att",
            display: "Proto+Att",
            prototype: "attention",
            distance: "euclidean",
            optimizer: "sgd",
        },
        FamilySpec { name: "relation", display: "Relation", prototype: "mean", distance: "relation", optimizer: "adadelta" },
        FamilySpec { name: "matching", display: "Matching", prototype: "mean", distance: "cosine", optimizer: "sgd" },
    ] {
        r.register(spec.name, spec);
    }
    r
}

/// Logits and probabilities over the `N + 1` episode classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ClassDistribution {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        let probs = exps.into_iter().map(|e| e / z).collect();
        Self { logits, probs }
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Scores one query against fixed prototypes.
pub fn score(
    query: &[f64],
    prototypes: &Array2<f64>,
    distance: &dyn Distance,
    store: &ParamStore,
) -> Result<ClassDistribution> {
    if query.len() != prototypes.ncols() {
        return Err(Error::Config(format!(
            "query width {} does not match prototype width {}",
            query.len(),
            prototypes.ncols()
        )));
    }
    let mut g = Graph::new(store);
    let q = g.constant(Array2::from_shape_vec((1, query.len()), query.to_vec()).expect("row"));
    let p = g.constant(prototypes.clone());
    let z = distance.logits(&mut g, q, p);
    Ok(ClassDistribution::from_logits(g.value(z).iter().copied().collect()))
}

pub fn predict(
    query: &[f64],
    prototypes: &Array2<f64>,
    distance: &dyn Distance,
    store: &ParamStore,
) -> Result<usize> {
    Ok(score(query, prototypes, distance, store)?.argmax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    fn euclid(q: &[f64], p: &Array2<f64>) -> ClassDistribution {
        score(q, p, &Euclidean, &ParamStore::new()).unwrap()
    }

    #[test]
    fn equidistant_prototypes_give_uniform() {
        let p = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]];
        let d = euclid(&[0.0, 0.0], &p);
        for x in &d.probs {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(d.argmax(), 0);
    }

    #[test]
    fn exact_match_dominates() {
        let p = array![[5.0, 5.0], [0.3, -0.2], [-4.0, 6.0]];
        let d = euclid(&[0.3, -0.2], &p);
        assert_eq!(d.argmax(), 1);
        assert!(d.probs[1] > d.probs[0] && d.probs[1] > d.probs[2]);
    }

    #[test]
    fn hand_computed_euclidean_softmax() {
        let p = array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]];
        let d = euclid(&[1.0, 1.0], &p);
        // squared distances 2, 1, 2
        let e = [(-2.0f64).exp(), (-1.0f64).exp(), (-2.0f64).exp()];
        let z: f64 = e.iter().sum();
        for (x, y) in d.probs.iter().zip(e.iter().map(|v| v / z)) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(d.logits, vec![-2.0, -1.0, -2.0]);
    }

    #[test]
    fn zero_vector_has_zero_cosine() {
        let p = array![[0.0, 0.0], [1.0, 0.0]];
        let d = score(&[0.0, 0.0], &p, &Cosine, &ParamStore::new()).unwrap();
        assert_eq!(d.logits, vec![0.0, 0.0]);
        let d = score(&[2.0, 0.0], &p, &Cosine, &ParamStore::new()).unwrap();
        assert_eq!(d.logits, vec![0.0, 1.0]);
    }

    #[test]
    fn relation_logits_have_one_entry_per_prototype() {
        let mut store = ParamStore::new();
        let rel = RelationComparator::new(3, &mut store, &mut ChaCha8Rng::seed_from_u64(0));
        let p = array![[0.1, 0.2, 0.3], [0.0, -1.0, 0.5]];
        let d = score(&[1.0, 0.0, -1.0], &p, &rel, &store).unwrap();
        assert_eq!(d.probs.len(), 2);
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn width_mismatch_is_error() {
        assert!(score(&[1.0], &array![[1.0, 2.0]], &Euclidean, &ParamStore::new()).is_err());
    }

    #[test]
    fn families_wire_expected_strategies() {
        let f = builtin_families();
        let att = f.get("proto_att").unwrap();
        assert_eq!((att.prototype, att.distance), ("attention", "euclidean"));
        let m = f.get("matching").unwrap();
        assert_eq!((m.prototype, m.distance), ("mean", "cosine"));
        assert_eq!(f.get("relation").unwrap().optimizer, "adadelta");
        assert!(f.get("siamese").is_err());
    }
}
