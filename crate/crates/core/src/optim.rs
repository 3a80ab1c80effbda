//! Parameter update rules.

use std::collections::HashMap;
use std::fmt::Debug;

use ndarray::{Array2, Zip};

use crate::graph::{Gradients, ParamId, ParamStore};
use crate::registry::Registry;

pub trait Optimizer: Debug + Send {
    fn kind(&self) -> &'static str;

    /// Applies one update with learning rate `lr`.
    fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64);
}

/// Plain stochastic gradient descent.
#[derive(Debug, Clone, Default)]
pub struct Sgd;

impl Optimizer for Sgd {
    fn kind(&self) -> &'static str {
        "sgd"
    }

    fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64) {
        for (id, g) in grads.iter() {
            store.get_mut(id).scaled_add(-lr, g);
        }
    }
}

/// AdaDelta with running averages of squared gradients and squared updates.
/// The raw update is multiplied by `lr`, so `lr = 1` is the textbook rule.
#[derive(Debug, Clone)]
pub struct AdaDelta {
    pub rho: f64,
    pub eps: f64,
    state: HashMap<ParamId, (Array2<f64>, Array2<f64>)>,
}

impl Default for AdaDelta {
    fn default() -> Self {
        Self { rho: 0.95, eps: 1e-6, state: HashMap::new() }
    }
}

impl Optimizer for AdaDelta {
    fn kind(&self) -> &'static str {
        "adadelta"
    }

    fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64) {
        let (rho, eps) = (self.rho, self.eps);
        for (id, g) in grads.iter() {
            let (acc_g, acc_u) =
                self.state.entry(id).or_insert_with(|| (Array2::zeros(g.raw_dim()), Array2::zeros(g.raw_dim())));
            Zip::from(store.get_mut(id)).and(g).and(acc_g).and(acc_u).for_each(|p, &gr, ag, au| {
                *ag = rho * *ag + (1.0 - rho) * gr * gr;
                let update = -((*au + eps).sqrt() / (*ag + eps).sqrt()) * gr;
                *au = rho * *au + (1.0 - rho) * update * update;
                *p += lr * update;
            });
        }
    }
}

pub type OptimizerFactory = fn() -> Box<dyn Optimizer>;

pub fn builtin_optimizers() -> Registry<OptimizerFactory> {
    let mut r: Registry<OptimizerFactory> = Registry::new("optimizer");
    r.register("sgd", || Box::new(Sgd)).register("adadelta", || Box::new(AdaDelta::default()));
    r
}

/// `initial * factor^(floor(iteration / every))`.
pub fn step_decay(initial: f64, factor: f64, every: usize, iteration: usize) -> f64 {
    if every == 0 {
        return initial;
    }
    initial * factor.powi((iteration / every) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use ndarray::array;

    fn quadratic_grads(store: &ParamStore, id: ParamId) -> Gradients {
        let mut g = Graph::new(store);
        let p = g.param(id);
        let sq = g.square(p);
        let loss = g.sum_all(sq);
        g.backward(loss)
    }

    #[test]
    fn sgd_step_matches_hand_update() {
        let mut store = ParamStore::new();
        let id = store.add("w", array![[1.0, -2.0]]);
        let grads = quadratic_grads(&store, id);
        Sgd.step(&mut store, &grads, 0.1);
        assert_eq!(store.get(id), &array![[0.8, -1.6]]);
    }

    #[test]
    fn adadelta_first_step() {
        let mut store = ParamStore::new();
        let id = store.add("w", array![[3.0]]);
        let grads = quadratic_grads(&store, id);
        let mut opt = AdaDelta::default();
        opt.step(&mut store, &grads, 1.0);
        let g = 6.0;
        let ag = 0.05 * g * g;
        let expected = 3.0 - (1e-6f64).sqrt() / (ag + 1e-6f64).sqrt() * g;
        assert!((store.get(id)[[0, 0]] - expected).abs() < 1e-15);
    }

    #[test]
    fn both_optimizers_descend_a_quadratic() {
        for name in ["sgd", "adadelta"] {
            let mut opt = builtin_optimizers().get(name).unwrap()();
            let mut store = ParamStore::new();
            let id = store.add("w", array![[1.5, -0.5]]);
            let start = store.get(id).mapv(|x| x * x).sum();
            for _ in 0..200 {
                let grads = quadratic_grads(&store, id);
                opt.step(&mut store, &grads, if name == "sgd" { 0.05 } else { 1.0 });
            }
            assert!(store.get(id).mapv(|x| x * x).sum() < start, "{name}");
        }
    }

    #[test]
    fn step_decay_halves() {
        assert_eq!(step_decay(0.03, 0.5, 500, 0), 0.03);
        assert_eq!(step_decay(0.03, 0.5, 500, 499), 0.03);
        assert_eq!(step_decay(0.03, 0.5, 500, 500), 0.015);
        assert_eq!(step_decay(0.03, 0.5, 500, 1999), 0.03 / 8.0);
    }
}
