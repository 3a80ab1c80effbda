//! Finite-difference gradient checks against [`Graph::backward`].

use crate::graph::{Graph, ParamStore, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`; truncation error O(h^2).
    #[default]
    Central,
    /// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`; truncation error O(h^4).
    FivePoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Denominator floor of the relative error, so gradients that are zero up
    /// to rounding do not divide by (almost) nothing.
    pub floor: f64,
    pub stencil: Stencil,
    /// When set, a scalar that fails at `step` is re-checked with this much
    /// smaller step. If it then passes `kink_tol`, the failure is attributed
    /// to a ReLU or max kink inside `[x - step, x + step]` and recorded in
    /// [`GradCheckReport::kinks`] instead of the error statistics.
    pub kink_step: Option<f64>,
    pub kink_tol: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-3, floor: 1e-6, stencil: Stencil::Central, kink_step: None, kink_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kink {
    pub at: String,
    pub analytic: f64,
    /// Estimate at the regular step.
    pub numeric: f64,
    pub rel_err: f64,
    /// Relative error at the kink step.
    pub small_step_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// `param[row, col]` with the largest relative error.
    pub worst: String,
    pub analytic: f64,
    pub numeric: f64,
    pub kinks: Vec<Kink>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    let e = (a - n).abs() / a.abs().max(n.abs()).max(floor);
    if e.is_finite() {
        e
    } else {
        f64::INFINITY
    }
}

/// Central-difference check with the default options.
pub fn check_gradients(
    store: &mut ParamStore,
    step: f64,
    floor: f64,
    loss: impl Fn(&mut Graph) -> Var,
) -> GradCheckReport {
    check_gradients_with(store, &GradCheckOptions { step, floor, ..GradCheckOptions::default() }, loss)
}

/// Compares analytic gradients of `loss` with finite differences for every
/// scalar of every parameter.
pub fn check_gradients_with(
    store: &mut ParamStore,
    opts: &GradCheckOptions,
    loss: impl Fn(&mut Graph) -> Var,
) -> GradCheckReport {
    let grads = {
        let mut g = Graph::new(store);
        let l = loss(&mut g);
        g.backward(l)
    };
    let eval = |store: &ParamStore| {
        let mut g = Graph::new(store);
        let l = loss(&mut g);
        g.scalar(l)
    };
    let numeric = |store: &mut ParamStore, id, r: usize, c: usize, h: f64| {
        let orig = store.get(id)[[r, c]];
        let mut at = |offset: f64| {
            store.get_mut(id)[[r, c]] = orig + offset;
            let v = eval(store);
            store.get_mut(id)[[r, c]] = orig;
            v
        };
        match opts.stencil {
            Stencil::Central => (at(h) - at(-h)) / (2.0 * h),
            Stencil::FivePoint => (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h),
        }
    };

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: String::new(),
        analytic: 0.0,
        numeric: 0.0,
        kinks: Vec::new(),
    };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let (rows, cols) = store.get(id).dim();
        for r in 0..rows {
            for c in 0..cols {
                let analytic = grads.get(id).map_or(0.0, |g| g[[r, c]]);
                let n = numeric(store, id, r, c, opts.step);
                let mut err = rel_err(analytic, n, opts.floor);
                report.checked += 1;
                if err > opts.kink_tol {
                    if let Some(small) = opts.kink_step {
                        let small_err = rel_err(analytic, numeric(store, id, r, c, small), opts.floor);
                        if small_err <= opts.kink_tol {
                            report.kinks.push(Kink {
                                at: format!("{}[{r}, {c}]", store.name(id)),
                                analytic,
                                numeric: n,
                                rel_err: err,
                                small_step_rel_err: small_err,
                            });
                            err = 0.0;
                        }
                    }
                }
                if err > report.max_rel_err {
                    report.max_rel_err = err;
                    report.worst = format!("{}[{r}, {c}]", store.name(id));
                    report.analytic = analytic;
                    report.numeric = n;
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn correct_gradient_passes() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[0.3, -0.7], [1.1, 0.2]]);
        let r = check_gradients(&mut store, 1e-3, 1e-2, |g| {
            let p = g.param(w);
            let t = g.tanh(p);
            let s = g.square(t);
            g.sum_all(s)
        });
        assert_eq!(r.checked, 4);
        assert!(r.passes(1e-4), "{r:?}");
    }

    #[test]
    fn detached_path_is_caught() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[0.5]]);
        let r = check_gradients(&mut store, 1e-3, 1e-2, |g| {
            let p = g.param(w);
            let d = g.detach(p);
            g.square(d)
        });
        assert!(!r.passes(1e-4));
        assert_eq!(r.worst, "w[0, 0]");
    }

    #[test]
    fn five_point_is_more_accurate() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[1.3]]);
        let f = |g: &mut Graph| {
            let p = g.param(w);
            let e = g.exp(p);
            g.sum_all(e)
        };
        let central = check_gradients(&mut store, 1e-2, 1e-6, f);
        let five = check_gradients_with(
            &mut store,
            &GradCheckOptions { step: 1e-2, stencil: Stencil::FivePoint, ..GradCheckOptions::default() },
            f,
        );
        assert!(five.max_rel_err < central.max_rel_err / 100.0, "{five:?} vs {central:?}");
    }

    #[test]
    fn kink_inside_step_is_reported_not_hidden() {
        let mut store = ParamStore::new();
        // relu kink 5e-4 away from x: the +-1e-3 stencil straddles it
        let w = store.add("w", array![[5e-4]]);
        let f = |g: &mut Graph| {
            let p = g.param(w);
            let r = g.relu(p);
            g.sum_all(r)
        };
        let plain = check_gradients(&mut store, 1e-3, 1e-6, f);
        assert!(!plain.passes(1e-4));
        let opts = GradCheckOptions { kink_step: Some(1e-7), ..GradCheckOptions::default() };
        let r = check_gradients_with(&mut store, &opts, f);
        assert!(r.passes(1e-4));
        assert_eq!(r.kinks.len(), 1);
        assert_eq!(r.kinks[0].at, "w[0, 0]");
    }

    #[test]
    fn wrong_gradient_is_not_excused_as_kink() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[0.5]]);
        let opts = GradCheckOptions { kink_step: Some(1e-7), ..GradCheckOptions::default() };
        let r = check_gradients_with(&mut store, &opts, |g| {
            let p = g.param(w);
            let d = g.detach(p);
            g.square(d)
        });
        assert!(!r.passes(1e-4));
        assert!(r.kinks.is_empty());
    }
}
