//! Grid search over auxiliary-loss weights and the family x encoder x
//! setting x loss-variant experiment matrix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::{derive_seed, streams, RunConfig};
use crate::corpus::CorpusSplit;
use crate::embedding::Vocabulary;
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::metrics::EvalReport;
use crate::reports::{ColumnGroup, ReportRow, ReportTable};
use crate::trainer::{evaluate, TrainOutcome, Trainer};

/// Which auxiliary terms a run trains with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LossVariant {
    Original,
    Inter,
    Intra,
    Both,
}

impl LossVariant {
    pub const ALL: [LossVariant; 4] = [LossVariant::Original, LossVariant::Inter, LossVariant::Intra, LossVariant::Both];

    pub fn label(self) -> &'static str {
        match self {
            LossVariant::Original => "Original",
            LossVariant::Inter => "+Inter",
            LossVariant::Intra => "+Intra",
            LossVariant::Both => "+Intra+Inter",
        }
    }

    /// `base` with the terms this variant leaves out switched off. Kept
    /// terms use the base weights.
    pub fn apply(self, base: &LossConfig) -> LossConfig {
        let mut cfg = base.clone();
        match self {
            LossVariant::Original => cfg.auxiliary = false,
            LossVariant::Inter => {
                cfg.auxiliary = true;
                cfg.beta = 0.0;
            }
            LossVariant::Intra => {
                cfg.auxiliary = true;
                cfg.gamma = 0.0;
            }
            LossVariant::Both => cfg.auxiliary = true,
        }
        cfg
    }
}

impl FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "original" | "none" => Ok(LossVariant::Original),
            "inter" | "+inter" => Ok(LossVariant::Inter),
            "intra" | "+intra" => Ok(LossVariant::Intra),
            "both" | "intra+inter" | "+intra+inter" | "inter+intra" => Ok(LossVariant::Both),
            other => Err(Error::Config(format!("unknown loss variant `{other}` (expected original, inter, intra, both)"))),
        }
    }
}

/// An `N+1`-way `K`-shot setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Setting {
    pub n: usize,
    pub k: usize,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+1-way {}-shot", self.n, self.k)
    }
}

impl FromStr for Setting {
    type Err = Error;

    /// Accepts `NxK`, e.g. `5x5` or `10x10`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("setting `{s}` is not of the form NxK (e.g. 5x5)"));
        let (n, k) = s.trim().to_lowercase().split_once('x').map(|(a, b)| (a.to_string(), b.to_string())).ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        let k: usize = k.parse().map_err(|_| bad())?;
        if n == 0 || k == 0 {
            return Err(bad());
        }
        Ok(Setting { n, k })
    }
}

/// `{0.0, 0.1, 0.2, 0.3}^2`.
pub fn default_grid() -> Vec<(f64, f64)> {
    let vals = [0.0, 0.1, 0.2, 0.3];
    vals.iter().flat_map(|&b| vals.iter().map(move |&g| (b, g))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GridRow {
    pub beta: f64,
    pub gamma: f64,
    pub best_dev_f1: f64,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub best_beta: f64,
    pub best_gamma: f64,
    pub best_dev_f1: f64,
    pub test: EvalReport,
    pub best: Checkpoint,
}

impl GridResult {
    pub fn table(&self) -> ReportTable {
        ReportTable {
            title: format!(
                "Grid search: best dev F1 per (beta, gamma); winner beta={} gamma={}",
                self.best_beta, self.best_gamma
            ),
            row_header: vec!["beta".into(), "gamma".into()],
            groups: vec![ColumnGroup { label: String::new(), columns: vec!["dev F1".into()] }],
            rows: self
                .rows
                .iter()
                .map(|r| ReportRow { labels: vec![r.beta.to_string(), r.gamma.to_string()], values: vec![Some(r.best_dev_f1)] })
                .collect(),
        }
    }
}

/// Test-side evaluation of a trained checkpoint with the run's sampler.
pub fn evaluate_test(trainer: &Trainer, ck: &Checkpoint, split: &CorpusSplit) -> Result<EvalReport> {
    let cfg = &ck.run_config;
    let model = ck.restore(&trainer.builder)?;
    evaluate(&model, &split.test, &cfg.sampler, cfg.eval_episodes, derive_seed(cfg.seed, streams::TEST_EPISODES))
}

/// One training run per `(beta, gamma)` with shared data and seed. The
/// winner has the highest best-dev F1; ties go to the smaller beta, then the
/// smaller gamma. Only the winner is evaluated on test.
pub fn grid_search(
    trainer: &Trainer,
    base: &RunConfig,
    grid: &[(f64, f64)],
    split: &CorpusSplit,
    vocab: &Vocabulary,
    mut on_run: impl FnMut(f64, f64, &TrainOutcome),
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Config("grid search needs at least one (beta, gamma) pair".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut winner: Option<(f64, f64, f64, Checkpoint)> = None;
    for &(beta, gamma) in grid {
        let cfg = RunConfig { loss: LossConfig { beta, gamma, auxiliary: true, ..base.loss.clone() }, ..base.clone() };
        log::info!("grid search: beta {beta} gamma {gamma}");
        let out = trainer.train(&cfg, split, vocab, |_| {})?;
        on_run(beta, gamma, &out);
        let f1 = out.best_dev_f1().unwrap_or(0.0);
        rows.push(GridRow { beta, gamma, best_dev_f1: f1 });
        let better = match &winner {
            None => true,
            Some((b, g, w, _)) => f1 > *w || (f1 == *w && (beta < *b || (beta == *b && gamma < *g))),
        };
        if better {
            winner = Some((beta, gamma, f1, out.best));
        }
    }
    let (best_beta, best_gamma, best_dev_f1, best) = winner.expect("nonempty grid");
    let test = evaluate_test(trainer, &best, split)?;
    Ok(GridResult { rows, best_beta, best_gamma, best_dev_f1, test, best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatrixCell {
    pub family: String,
    pub encoder: String,
    pub setting: Setting,
    pub variant: LossVariant,
    pub dev_f1: f64,
    pub test_f1: f64,
    pub best_iteration: usize,
}

#[derive(Debug, Clone)]
pub struct MatrixSpec {
    pub families: Vec<String>,
    pub encoders: Vec<String>,
    pub settings: Vec<Setting>,
    pub variants: Vec<LossVariant>,
}

impl Default for MatrixSpec {
    fn default() -> Self {
        Self {
            families: ["proto", "proto_att", "relation", "matching"].map(String::from).to_vec(),
            encoders: ["cnn", "lstm", "gcn"].map(String::from).to_vec(),
            settings: vec![Setting { n: 5, k: 5 }, Setting { n: 10, k: 10 }],
            variants: LossVariant::ALL.to_vec(),
        }
    }
}

impl MatrixSpec {
    pub fn validate(&self, trainer: &Trainer) -> Result<()> {
        if self.families.is_empty() || self.encoders.is_empty() || self.settings.is_empty() || self.variants.is_empty() {
            return Err(Error::Config("matrix needs at least one family, encoder, setting and loss variant".into()));
        }
        for f in &self.families {
            trainer.builder.families.get(f)?;
        }
        for e in &self.encoders {
            trainer.builder.encoders.get(e)?;
        }
        Ok(())
    }

    /// Run configuration of one cell.
    pub fn cell_config(base: &RunConfig, family: &str, encoder: &str, setting: Setting, variant: LossVariant) -> RunConfig {
        let mut cfg = base.clone();
        cfg.model_family = family.to_string();
        cfg.encoder.kind = encoder.to_string();
        cfg.sampler.n = setting.n;
        cfg.sampler.k = setting.k;
        if let Some(p) = cfg.sampler.class_pool_size {
            cfg.sampler.class_pool_size = Some(p.max(setting.n));
        }
        cfg.loss = variant.apply(&base.loss);
        cfg
    }
}

/// Trains and evaluates every cell. Cells are independent and run in order.
pub fn experiment_matrix(
    trainer: &Trainer,
    base: &RunConfig,
    spec: &MatrixSpec,
    split: &CorpusSplit,
    vocab: &Vocabulary,
    mut on_cell: impl FnMut(&MatrixCell, &TrainOutcome),
) -> Result<Vec<MatrixCell>> {
    spec.validate(trainer)?;
    let mut cells = Vec::new();
    for family in &spec.families {
        for encoder in &spec.encoders {
            for &setting in &spec.settings {
                for &variant in &spec.variants {
                    let cfg = MatrixSpec::cell_config(base, family, encoder, setting, variant);
                    log::info!("matrix cell: {family} / {encoder} / {setting} / {}", variant.label());
                    let out = trainer.train(&cfg, split, vocab, |_| {})?;
                    let test = evaluate_test(trainer, &out.best, split)?;
                    let cell = MatrixCell {
                        family: family.clone(),
                        encoder: encoder.clone(),
                        setting,
                        variant,
                        dev_f1: out.best_dev_f1().unwrap_or(0.0),
                        test_f1: test.f1,
                        best_iteration: out.best.iteration,
                    };
                    on_cell(&cell, &out);
                    cells.push(cell);
                }
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Dev,
    Test,
}

impl Metric {
    fn of(self, c: &MatrixCell) -> f64 {
        match self {
            Metric::Dev => c.dev_f1,
            Metric::Test => c.test_f1,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::Dev => "dev",
            Metric::Test => "test",
        }
    }
}

/// Builds report tables from matrix cells.
pub struct TableBuilder<'a> {
    pub cells: &'a [MatrixCell],
    pub spec: &'a MatrixSpec,
    pub trainer: &'a Trainer,
}

impl TableBuilder<'_> {
    fn family_display(&self, name: &str) -> String {
        self.trainer.builder.families.get(name).map(|f| f.display.to_string()).unwrap_or_else(|_| name.to_string())
    }

    fn value(&self, family: &str, encoder: &str, setting: Setting, variant: LossVariant, metric: Metric) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.family == family && c.encoder == encoder && c.setting == setting && c.variant == variant)
            .map(|c| metric.of(c))
    }

    /// Families as rows; one column group per setting, one column per
    /// encoder; runs without auxiliary losses.
    pub fn table1(&self, metric: Metric) -> Option<ReportTable> {
        if !self.spec.variants.contains(&LossVariant::Original) {
            return None;
        }
        let groups = self
            .spec
            .settings
            .iter()
            .map(|s| ColumnGroup { label: s.to_string(), columns: self.spec.encoders.iter().map(|e| e.to_uppercase()).collect() })
            .collect();
        let rows = self
            .spec
            .families
            .iter()
            .map(|f| ReportRow {
                labels: vec![self.family_display(f)],
                values: self
                    .spec
                    .settings
                    .iter()
                    .flat_map(|&s| self.spec.encoders.iter().map(move |e| (s, e)))
                    .map(|(s, e)| self.value(f, e, s, LossVariant::Original, metric))
                    .collect(),
            })
            .collect();
        Some(ReportTable {
            title: format!("F1-score (micro, {}) of models without auxiliary losses", metric.label()),
            row_header: vec!["Model".into()],
            groups,
            rows,
        })
    }

    /// `(encoder, family)` rows; per setting, Original versus both auxiliary
    /// terms.
    pub fn table2(&self, metric: Metric) -> Option<ReportTable> {
        let v = &self.spec.variants;
        if !(v.contains(&LossVariant::Original) && v.contains(&LossVariant::Both)) {
            return None;
        }
        let cols = [LossVariant::Original, LossVariant::Both];
        let groups = self
            .spec
            .settings
            .iter()
            .map(|s| ColumnGroup { label: s.to_string(), columns: cols.iter().map(|c| c.label().to_string()).collect() })
            .collect();
        let mut rows = Vec::new();
        for f in &self.spec.families {
            for e in &self.spec.encoders {
                rows.push(ReportRow {
                    labels: vec![e.to_uppercase(), self.family_display(f)],
                    values: self
                        .spec
                        .settings
                        .iter()
                        .flat_map(|&s| cols.iter().map(move |&c| (s, c)))
                        .map(|(s, c)| self.value(f, e, s, c, metric))
                        .collect(),
                });
            }
        }
        Some(ReportTable {
            title: format!("F1-score (micro, {}) without and with the intra and inter losses", metric.label()),
            row_header: vec!["Encoder".into(), "Model".into()],
            groups,
            rows,
        })
    }

    /// Ablation over every loss variant for one setting.
    pub fn table3(&self, metric: Metric, setting: Setting) -> ReportTable {
        let mut rows = Vec::new();
        for f in &self.spec.families {
            for e in &self.spec.encoders {
                rows.push(ReportRow {
                    labels: vec![e.to_uppercase(), self.family_display(f)],
                    values: self.spec.variants.iter().map(|&v| self.value(f, e, setting, v, metric)).collect(),
                });
            }
        }
        ReportTable {
            title: format!("Ablation study: F1-score (micro, {}) with {setting}", metric.label()),
            row_header: vec!["Encoder".into(), "FSL Model".into()],
            groups: vec![ColumnGroup {
                label: String::new(),
                columns: self.spec.variants.iter().map(|v| v.label().to_string()).collect(),
            }],
            rows,
        }
    }

    /// Every table the cells support, keyed by a file stem.
    pub fn all(&self) -> Vec<(String, ReportTable)> {
        let mut out = Vec::new();
        for metric in [Metric::Dev, Metric::Test] {
            if let Some(t) = self.table1(metric) {
                out.push((format!("table1_{}", metric.label()), t));
            }
            if let Some(t) = self.table2(metric) {
                out.push((format!("table2_{}", metric.label()), t));
            }
        }
        for &s in &self.spec.settings {
            for metric in [Metric::Dev, Metric::Test] {
                out.push((format!("table3_{}x{}_{}", s.n, s.k, metric.label()), self.table3(metric, s)));
            }
        }
        out
    }
}
