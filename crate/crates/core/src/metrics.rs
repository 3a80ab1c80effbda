//! Micro-averaged precision, recall and F1 over positive event classes.
//!
//! Every query contributes one prediction. A positive prediction that matches
//! gold is a true positive. A positive prediction that is wrong is a false
//! positive for the predicted class and, when gold is positive too, a false
//! negative for the gold class. Predicting NULL for a positive query is a
//! false negative. NULL-NULL agreements count for nothing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn merge(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
    pub per_class: BTreeMap<String, Counts>,
    pub episodes_evaluated: usize,
    pub queries_evaluated: usize,
}

/// Accumulates predictions across episodes.
#[derive(Debug, Clone, Default)]
pub struct MicroF1 {
    counts: Counts,
    per_class: BTreeMap<String, Counts>,
    episodes: usize,
    queries: usize,
}

impl MicroF1 {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one query. `None` stands for NULL.
    pub fn add(&mut self, gold: Option<&str>, predicted: Option<&str>) {
        self.queries += 1;
        match (gold, predicted) {
            (Some(g), Some(p)) if g == p => {
                self.counts.tp += 1;
                self.class(g).tp += 1;
            }
            (gold, predicted) => {
                if let Some(p) = predicted {
                    self.counts.fp += 1;
                    self.class(p).fp += 1;
                }
                if let Some(g) = gold {
                    self.counts.fn_ += 1;
                    self.class(g).fn_ += 1;
                }
            }
        }
    }

    /// Records every query of one episode; class `null_index` is NULL.
    pub fn add_episode(&mut self, class_names: &[String], null_index: usize, gold: &[usize], predicted: &[usize]) {
        assert_eq!(gold.len(), predicted.len());
        let name = |c: usize| (c != null_index).then(|| class_names[c].as_str());
        for (&g, &p) in gold.iter().zip(predicted) {
            self.add(name(g), name(p));
        }
        self.episodes += 1;
    }

    pub fn merge(&mut self, other: &MicroF1) {
        self.counts.merge(&other.counts);
        for (k, v) in &other.per_class {
            self.per_class.entry(k.clone()).or_default().merge(v);
        }
        self.episodes += other.episodes;
        self.queries += other.queries;
    }

    fn class(&mut self, name: &str) -> &mut Counts {
        self.per_class.entry(name.to_string()).or_default()
    }

    pub fn report(&self) -> EvalReport {
        EvalReport {
            precision: self.counts.precision(),
            recall: self.counts.recall(),
            f1: self.counts.f1(),
            counts: self.counts,
            per_class: self.per_class.clone(),
            episodes_evaluated: self.episodes,
            queries_evaluated: self.queries,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct_is_one() {
        let mut m = MicroF1::new();
        m.add(Some("A"), Some("A"));
        m.add(None, None);
        let r = m.report();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn all_null_predictions_give_zero() {
        let mut m = MicroF1::new();
        m.add(Some("A"), None);
        m.add(Some("B"), None);
        let r = m.report();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert_eq!(r.counts.fn_, 2);
    }

    #[test]
    fn confusion_counts() {
        let mut m = MicroF1::new();
        m.add(Some("A"), Some("B"));
        m.add(None, Some("A"));
        m.add(Some("B"), Some("B"));
        let r = m.report();
        assert_eq!(r.counts, Counts { tp: 1, fp: 2, fn_: 1 });
        assert!((r.precision - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.recall - 0.5).abs() < 1e-15);
        assert!((r.f1 - 0.4).abs() < 1e-15);
        assert_eq!(r.per_class["A"], Counts { tp: 0, fp: 1, fn_: 1 });
        assert_eq!(r.per_class["B"], Counts { tp: 1, fp: 1, fn_: 0 });
    }

    #[test]
    fn episode_and_merge() {
        let names: Vec<String> = ["X", "Y", "NULL"].map(String::from).to_vec();
        let mut a = MicroF1::new();
        a.add_episode(&names, 2, &[0, 1, 2], &[0, 2, 1]);
        let mut b = MicroF1::new();
        b.add_episode(&names, 2, &[0, 1, 2], &[0, 1, 2]);
        a.merge(&b);
        let r = a.report();
        assert_eq!(r.episodes_evaluated, 2);
        assert_eq!(r.queries_evaluated, 6);
        assert_eq!(r.counts, Counts { tp: 3, fp: 1, fn_: 1 });
    }
}
