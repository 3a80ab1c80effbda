//! Episodic training, evaluation and the metrics log.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, RngState};
use crate::config::{derive_seed, streams, RunConfig};
use crate::corpus::{CorpusSplit, SplitSide};
use crate::data::position_table;
use crate::embedding::Vocabulary;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::losses::LossBreakdown;
use crate::metrics::{EvalReport, MicroF1};
use crate::model::{FewShotModel, ModelBuilder};
use crate::optim::{builtin_optimizers, step_decay, OptimizerFactory};
use crate::registry::Registry;
use crate::sampler::{Episode, EpisodeSampler, SamplerConfig};

pub const METRICS_HEADER: [&str; 9] =
    ["iteration", "lr", "loss_total", "loss_query", "loss_intra", "loss_inter", "dev_P", "dev_R", "dev_F1"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// One line of the metrics log. `loss_intra` and `loss_inter` hold the scaled
/// terms, so `loss_total = loss_query + beta * loss_intra + gamma * loss_inter`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub lr: f64,
    pub loss: LossBreakdown,
    pub dev: Option<DevScore>,
}

impl MetricsRow {
    pub fn record(&self) -> [String; 9] {
        let dev = |f: fn(&DevScore) -> f64| self.dev.as_ref().map(|d| f(d).to_string()).unwrap_or_default();
        [
            self.iteration.to_string(),
            self.lr.to_string(),
            self.loss.total.to_string(),
            self.loss.query.to_string(),
            self.loss.intra_scaled.to_string(),
            self.loss.inter_scaled.to_string(),
            dev(|d| d.precision),
            dev(|d| d.recall),
            dev(|d| d.f1),
        ]
    }
}

/// Writes the metrics log as CSV.
pub fn write_metrics_csv(rows: &[MetricsRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-dev checkpoint; the initial model when no evaluation ran.
    pub best: Checkpoint,
    /// Model state after the last iteration.
    pub last: Checkpoint,
    pub log: Vec<MetricsRow>,
    pub evals: Vec<(usize, EvalReport)>,
    pub optimizer: String,
}

impl TrainOutcome {
    pub fn best_dev_f1(&self) -> Option<f64> {
        self.best.best_dev_f1
    }
}

/// Resolves the optimizer name, refusing SGD for the relation family unless
/// forced. Returns the name and an optional warning.
pub fn resolve_optimizer(cfg: &RunConfig, builder: &ModelBuilder) -> Result<(String, Option<String>)> {
    let family = builder.families.get(&cfg.model_family)?;
    let requested = cfg.optimizer.clone().unwrap_or_else(|| family.optimizer.to_string()).to_lowercase();
    if family.name == "relation" && requested == "sgd" && !cfg.force_optimizer {
        return Ok((
            "adadelta".into(),
            Some("SGD hardly converges with the relation family; using adadelta (set forceOptimizer to keep sgd)".into()),
        ));
    }
    Ok((requested, None))
}

/// Sampler settings for evaluating on `side`: `n` shrinks to the number of
/// available types. Returns a warning when it had to shrink.
pub fn eval_sampler_config(base: &SamplerConfig, side: &SplitSide, seed: u64) -> (SamplerConfig, Option<String>) {
    let available = side.types().len();
    let mut cfg = SamplerConfig { class_pool_size: None, seed, ..base.clone() };
    let mut warning = None;
    if available < cfg.n && available > 0 {
        warning = Some(format!("evaluation side has {available} event types; evaluating {available}+1-way instead of {}+1-way", cfg.n));
        cfg.n = available;
    }
    (cfg, warning)
}

/// Draws `count` evaluation episodes from a seeded stream.
pub fn sample_eval_episodes(side: &SplitSide, cfg: &SamplerConfig, count: usize) -> Result<Vec<Episode>> {
    let sampler = EpisodeSampler::new(side, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..count).map(|_| sampler.sample(&mut rng)).collect()
}

/// Predicts every query of every episode (in parallel; parameters are
/// frozen) and tallies micro-F1. Returns the predictions per episode too.
pub fn evaluate_episodes(model: &FewShotModel, episodes: &[Episode]) -> (EvalReport, Vec<Vec<usize>>) {
    let predictions: Vec<Vec<usize>> = episodes.par_iter().map(|ep| model.predict_episode(ep)).collect();
    let mut f1 = MicroF1::new();
    for (ep, pred) in episodes.iter().zip(&predictions) {
        let names: Vec<String> = ep.class_map.iter().map(|t| t.name.clone()).collect();
        let gold: Vec<usize> = ep.queries.iter().map(|(_, c)| *c).collect();
        f1.add_episode(&names, ep.null_index(), &gold, pred);
    }
    (f1.report(), predictions)
}

/// Samples `episodes` evaluation episodes from `side` and scores the model.
pub fn evaluate(model: &FewShotModel, side: &SplitSide, sampler: &SamplerConfig, episodes: usize, seed: u64) -> Result<EvalReport> {
    if side.is_empty() {
        return Err(Error::Sampler("evaluation side has no mentions".into()));
    }
    let (cfg, warning) = eval_sampler_config(sampler, side, seed);
    if let Some(w) = warning {
        log::warn!("{w}");
    }
    let eps = sample_eval_episodes(side, &cfg, episodes)?;
    Ok(evaluate_episodes(model, &eps).0)
}

pub struct Trainer {
    pub builder: ModelBuilder,
    pub optimizers: Registry<OptimizerFactory>,
}

impl Default for Trainer {
    fn default() -> Self {
        Self { builder: ModelBuilder::default(), optimizers: builtin_optimizers() }
    }
}

impl Trainer {
    pub fn build_model(&self, cfg: &RunConfig, vocab: &Vocabulary) -> Result<FewShotModel> {
        self.builder.build(&cfg.model_family, &cfg.encoder, vocab, position_table(&cfg.data), cfg.seed)
    }

    /// Trains from scratch. `on_row` sees each metrics row as it is produced.
    pub fn train(
        &self,
        cfg: &RunConfig,
        split: &CorpusSplit,
        vocab: &Vocabulary,
        mut on_row: impl FnMut(&MetricsRow),
    ) -> Result<TrainOutcome> {
        cfg.validate()?;
        let (opt_name, warning) = resolve_optimizer(cfg, &self.builder)?;
        if let Some(w) = warning {
            log::warn!("{w}");
        }
        let mut optimizer = self.optimizers.get(&opt_name)?();
        let mut model = self.build_model(cfg, vocab)?;

        let train_cfg = SamplerConfig { seed: derive_seed(cfg.seed, streams::TRAIN_EPISODES), ..cfg.sampler.clone() };
        let train_sampler = EpisodeSampler::new(&split.train, &train_cfg)?;
        let (dev_cfg, warning) = eval_sampler_config(&cfg.sampler, &split.dev, derive_seed(cfg.seed, streams::DEV_EPISODES));
        if let Some(w) = warning {
            log::warn!("{w}");
        }
        let dev_episodes =
            if cfg.iterations > 0 { sample_eval_episodes(&split.dev, &dev_cfg, cfg.eval_episodes)? } else { Vec::new() };
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, streams::DROPOUT));

        let mut best = Checkpoint::capture(&model, cfg, 0, &opt_name);
        let mut best_f1: Option<f64> = None;
        let mut log_rows = Vec::with_capacity(cfg.iterations);
        let mut evals = Vec::new();
        let mut stream = train_sampler.stream(cfg.iterations);

        for t in 1..=cfg.iterations {
            let lr = step_decay(cfg.initial_lr, cfg.decay_factor, cfg.decay_every, t);
            let episode = stream.next().expect("stream yields one episode per iteration")?;
            let (breakdown, mut grads) = {
                let mut g = Graph::new(&model.store);
                let (loss, breakdown, _) = model.episode_loss(&mut g, &episode, &cfg.loss, Some(&mut dropout_rng));
                if !breakdown.total.is_finite() {
                    return Err(Error::Diverged { iteration: t, lr });
                }
                (breakdown, g.backward(loss))
            };
            if let Some(c) = cfg.clip_norm {
                grads.clip_global_norm(c);
            }
            optimizer.step(&mut model.store, &grads, lr);

            let mut row = MetricsRow { iteration: t, lr, loss: breakdown, dev: None };
            if t % cfg.eval_every == 0 || t == cfg.iterations {
                let (report, _) = evaluate_episodes(&model, &dev_episodes);
                log::info!(
                    "iteration {t}: loss {:.4} dev P {:.4} R {:.4} F1 {:.4}",
                    breakdown.total,
                    report.precision,
                    report.recall,
                    report.f1
                );
                row.dev = Some(DevScore { precision: report.precision, recall: report.recall, f1: report.f1 });
                if best_f1.is_none_or(|b| report.f1 > b) {
                    best_f1 = Some(report.f1);
                    best = Checkpoint::capture(&model, cfg, t, &opt_name);
                    best.rng_states = rng_states(stream.rng(), &dropout_rng);
                }
                evals.push((t, report));
            }
            on_row(&row);
            log_rows.push(row);
        }

        let mut last = Checkpoint::capture(&model, cfg, cfg.iterations, &opt_name);
        last.rng_states = rng_states(stream.rng(), &dropout_rng);
        last.best_dev_f1 = best_f1;
        best.best_dev_f1 = best_f1;
        Ok(TrainOutcome { best, last, log: log_rows, evals, optimizer: opt_name })
    }
}

fn rng_states(train: &ChaCha8Rng, dropout: &ChaCha8Rng) -> std::collections::BTreeMap<String, RngState> {
    [("trainEpisodes".to_string(), RngState::capture(train)), ("dropout".to_string(), RngState::capture(dropout))]
        .into_iter()
        .collect()
}
