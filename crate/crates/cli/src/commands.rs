use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fsed_core::checkpoint::Checkpoint;
use fsed_core::config::{derive_seed, streams, RunConfig};
use fsed_core::corpus::{CorpusSplit, SplitName, SplitSide};
use fsed_core::data::{load_and_split, prepare};
use fsed_core::experiments::{
    default_grid, evaluate_test, experiment_matrix, grid_search as run_grid, LossVariant, MatrixSpec, Setting,
    TableBuilder,
};
use fsed_core::metrics::EvalReport;
use fsed_core::sampler::{EpisodeSampler, SamplerConfig};
use fsed_core::synth::{generate_synthetic_corpus, SyntheticSpec};
use fsed_core::trainer::{eval_sampler_config, evaluate as eval_side, MetricsRow, Trainer};
use serde_json::json;

use crate::args::{EvalArgs, GridArgs, InspectArgs, MatrixArgs, OutArgsOpt, RunArgs, SynthArgs};
use crate::invalid;
use crate::output::{out_root, write_json, write_text, RunDir};

fn read_input(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {what} {}: {e}", path.display())))
}

fn require_file(path: Option<&PathBuf>, what: &str) -> Result<()> {
    match path {
        Some(p) if !p.is_file() => Err(invalid(format!("{what} {} does not exist", p.display()))),
        _ => Ok(()),
    }
}

/// Config file (or defaults), then flag overrides, then validation.
pub fn resolve_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_json(&read_input(p, "config")?).with_context(|| format!("parsing {}", p.display()))?,
        None => RunConfig::default(),
    };
    args.apply(&mut cfg);
    cfg.validate()?;
    require_file(cfg.data.corpus.as_ref(), "corpus")?;
    require_file(cfg.data.embeddings.as_ref(), "embeddings")?;
    if cfg.data.corpus.is_none() {
        return Err(invalid("no corpus given (set data.corpus in --config or pass --corpus)"));
    }
    Ok(cfg)
}

fn run_dir(out: &OutArgsOpt, default_name: String) -> Result<RunDir> {
    let root = out_root(out.out.as_deref());
    RunDir::create(root.join(out.name.clone().unwrap_or(default_name)))
}

fn side_stream(side: SplitName) -> u64 {
    match side {
        SplitName::Train => streams::TRAIN_EPISODES,
        SplitName::Dev => streams::DEV_EPISODES,
        SplitName::Test => streams::TEST_EPISODES,
    }
}

fn side_summary(side: &SplitSide) -> serde_json::Value {
    let mut per_type: BTreeMap<&str, usize> = BTreeMap::new();
    for m in &side.mentions {
        *per_type.entry(m.label.name.as_str()).or_default() += 1;
    }
    json!({ "mentions": side.mentions.len(), "background": side.background.len(), "perType": per_type })
}

fn split_summary(split: &CorpusSplit) -> serde_json::Value {
    json!({
        "trainTypes": split.train_types,
        "devTestTypes": split.dev_test_types,
        "droppedTypes": split.dropped_types,
        "train": side_summary(&split.train),
        "dev": side_summary(&split.dev),
        "test": side_summary(&split.test),
    })
}

pub fn prepare_data(args: &RunArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let data = prepare(&cfg.data, cfg.seed)?;
    let dir = run_dir(&args.out, format!("prepare-s{}", cfg.data.split.seed))?;
    dir.write_config(&cfg)?;
    dir.write_report_json("split_manifest.json", &data.split.manifest())?;
    let stats = json!({
        "sentences": data.corpus.stats.sentences,
        "mentions": data.corpus.stats.mentions,
        "perType": data.corpus.stats.per_type,
        "vocabulary": data.vocab.len(),
        "embeddingDim": data.vocab.dim(),
        "split": split_summary(&data.split),
    });
    dir.write_report_json("corpus_stats.json", &stats)?;
    say!(
        "{} mentions in {} sentences; {} train / {} dev / {} test mentions; {} train types, {} dev/test types, {} dropped",
        data.corpus.stats.mentions,
        data.corpus.stats.sentences,
        data.split.train.mentions.len(),
        data.split.dev.mentions.len(),
        data.split.test.mentions.len(),
        data.split.train_types.len(),
        data.split.dev_test_types.len(),
        data.split.dropped_types.len(),
    );
    say!("wrote {}", dir.root.display());
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(p) => serde_json::from_str::<SyntheticSpec>(&read_input(p, "synthetic spec")?)
            .map_err(fsed_core::Error::from)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => SyntheticSpec::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field {
                spec.$field = v;
            }
        )*};
    }
    set!(num_types, types_per_parent, train_parents, mentions_per_type, vocab_per_type, embedding_dim, distractor_sentences, seed);
    if args.ace_like {
        spec.ace_like = true;
    }
    let synth = generate_synthetic_corpus(&spec)?;

    let root = out_root(args.out.out.as_deref()).join(args.out.name.clone().unwrap_or_else(|| "synth".into()));
    let (corpus, embeddings) = synth.write(&root)?;
    write_json(&root.join("synth.resolved.json"), &spec)?;

    let mut run = RunConfig::default();
    run.data.corpus = Some(fs::canonicalize(&corpus).unwrap_or(corpus.clone()));
    run.data.embeddings = Some(fs::canonicalize(&embeddings).unwrap_or(embeddings.clone()));
    run.data.embedding_dim = spec.embedding_dim;
    run.data.split = synth.split_params(spec.seed);
    write_text(&root.join("run.json"), &run.to_json())?;

    say!(
        "{} types ({} train parents), {} mentions -> {}",
        synth.types.len(),
        synth.train_parents.len(),
        synth.mention_count(),
        root.display()
    );
    say!("starter config: {}", root.join("run.json").display());
    Ok(())
}

pub fn train(args: &RunArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let data = prepare(&cfg.data, cfg.seed)?;
    let dir = run_dir(&args.out, format!("train-{}-{}-s{}", cfg.model_family, cfg.encoder.kind, cfg.seed))?;
    dir.write_config(&cfg)?;

    let trainer = Trainer::default();
    let out = trainer.train(&cfg, &data.split, &data.vocab, |_| {})?;
    dir.write_metrics(&out.log)?;
    dir.save_checkpoint("best.ckpt", &out.best)?;
    dir.save_checkpoint("last.ckpt", &out.last)?;

    let test = if cfg.iterations > 0 { Some(evaluate_test(&trainer, &out.best, &data.split)?) } else { None };
    let dev: Vec<_> = out.evals.iter().map(|(t, r)| json!({ "iteration": t, "report": r })).collect();
    dir.write_report_json(
        "summary.json",
        &json!({
            "optimizer": out.optimizer,
            "bestIteration": out.best.iteration,
            "bestDevF1": out.best_dev_f1(),
            "test": test,
            "dev": dev,
        }),
    )?;
    match (&test, out.best_dev_f1()) {
        (Some(t), Some(d)) => {
            say!("best dev F1 {d:.4} at iteration {}; test F1 {:.4}", out.best.iteration, t.f1)
        }
        _ => say!("no evaluation (0 iterations)"),
    }
    say!("wrote {}", dir.root.display());
    Ok(())
}

pub fn evaluate(args: &EvalArgs) -> Result<()> {
    if !args.checkpoint.is_file() {
        return Err(invalid(format!("checkpoint {} does not exist", args.checkpoint.display())));
    }
    let ck = Checkpoint::load(&args.checkpoint)?;
    let mut cfg = ck.run_config.clone();
    if let Some(c) = &args.corpus {
        cfg.data.corpus = Some(c.clone());
    }
    require_file(cfg.data.corpus.as_ref(), "corpus")?;
    let mut sampler = SamplerConfig { ..cfg.sampler.clone() };
    if let Some(n) = args.n {
        sampler.n = n;
    }
    if let Some(k) = args.k {
        sampler.k = k;
    }
    sampler.validate()?;

    let (_, split) = load_and_split(&cfg.data)?;
    let model = ck.restore(&Trainer::default().builder)?;
    let side: SplitName = args.split.into();
    let seed = args.seed.unwrap_or(cfg.seed);
    let report: EvalReport = eval_side(
        &model,
        split.side(side),
        &sampler,
        args.episodes.unwrap_or(cfg.eval_episodes),
        derive_seed(seed, side_stream(side)),
    )?;
    if let Some(p) = &args.report {
        write_json(p, &report)?;
    }
    say!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut grid = Vec::new();
    for pair in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let parsed: Option<(f64, f64)> = pair.split_once(',').and_then(|(b, g)| Some((b.trim().parse().ok()?, g.trim().parse().ok()?)));
        match parsed {
            Some((b, g)) if b >= 0.0 && g >= 0.0 && b.is_finite() && g.is_finite() => grid.push((b, g)),
            _ => return Err(invalid(format!("bad grid entry `{pair}` (expected `beta,gamma` with non-negative values)"))),
        }
    }
    if grid.is_empty() {
        return Err(invalid("empty --grid"));
    }
    Ok(grid)
}

fn pair_name(beta: f64, gamma: f64) -> String {
    format!("beta{beta}_gamma{gamma}")
}

pub fn grid_search(args: &GridArgs) -> Result<()> {
    let cfg = resolve_config(&args.run)?;
    let grid = match &args.grid {
        Some(g) => parse_grid(g)?,
        None => default_grid(),
    };
    let data = prepare(&cfg.data, cfg.seed)?;
    let dir = run_dir(&args.run.out, format!("grid-{}-{}-s{}", cfg.model_family, cfg.encoder.kind, cfg.seed))?;
    dir.write_config(&cfg)?;

    let trainer = Trainer::default();
    let mut logs: BTreeMap<String, Vec<MetricsRow>> = BTreeMap::new();
    let mut io_result = Ok(());
    let result = run_grid(&trainer, &cfg, &grid, &data.split, &data.vocab, |b, g, out| {
        let name = pair_name(b, g);
        if io_result.is_ok() {
            io_result = RunDir::create(dir.root.join("runs").join(&name)).and_then(|d| {
                d.write_config(&out.best.run_config)?;
                d.write_metrics(&out.log)
            });
        }
        logs.insert(name, out.log.clone());
    })?;
    io_result?;

    if let Some(log) = logs.get(&pair_name(result.best_beta, result.best_gamma)) {
        dir.write_metrics(log)?;
    }
    dir.save_checkpoint("best.ckpt", &result.best)?;
    let table = result.table();
    dir.write_report_text("grid.csv", &table.to_csv()?)?;
    dir.write_report_text("grid.txt", &table.to_text())?;
    dir.write_report_json(
        "summary.json",
        &json!({
            "rows": result.rows,
            "bestBeta": result.best_beta,
            "bestGamma": result.best_gamma,
            "bestDevF1": result.best_dev_f1,
            "test": result.test,
        }),
    )?;
    say_raw!("{}", table.to_text());
    say!(
        "winner beta={} gamma={} dev F1 {:.4}; test F1 {:.4}",
        result.best_beta, result.best_gamma, result.best_dev_f1, result.test.f1
    );
    say!("wrote {}", dir.root.display());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(items: &[String], what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    items
        .iter()
        .map(|s| s.trim().parse::<T>().map_err(|e| invalid(format!("bad {what} `{s}`: {e}"))))
        .collect()
}

pub fn matrix(args: &MatrixArgs) -> Result<()> {
    let base = resolve_config(&args.run)?;
    let spec = MatrixSpec {
        families: args.families.iter().map(|s| s.trim().to_string()).collect(),
        encoders: args.encoders.iter().map(|s| s.trim().to_string()).collect(),
        settings: parse_list::<Setting>(&args.settings, "setting")?,
        variants: parse_list::<LossVariant>(&args.losses, "loss variant")?,
    };
    let trainer = Trainer::default();
    spec.validate(&trainer)?;
    let data = prepare(&base.data, base.seed)?;
    let dir = run_dir(&args.run.out, format!("matrix-s{}", base.seed))?;
    dir.write_config(&base)?;
    dir.write_report_json(
        "matrix_spec.json",
        &json!({
            "families": spec.families,
            "encoders": spec.encoders,
            "settings": spec.settings,
            "variants": spec.variants,
        }),
    )?;

    let mut io_result = Ok(());
    let cells = experiment_matrix(&trainer, &base, &spec, &data.split, &data.vocab, |cell, out| {
        if io_result.is_err() {
            return;
        }
        let name = format!(
            "{}_{}_{}x{}_{}",
            cell.family,
            cell.encoder,
            cell.setting.n,
            cell.setting.k,
            format!("{:?}", cell.variant).to_lowercase()
        );
        io_result = RunDir::create(dir.root.join("cells").join(name)).and_then(|d| {
            d.write_config(&out.best.run_config)?;
            d.write_metrics(&out.log)?;
            if args.save_checkpoints {
                d.save_checkpoint("best.ckpt", &out.best)?;
            }
            Ok(())
        });
        let _ = crate::emit(&format!(
            "{} / {} / {} / {}: dev F1 {:.4} test F1 {:.4}\n",
            cell.family,
            cell.encoder,
            cell.setting,
            cell.variant.label(),
            cell.dev_f1,
            cell.test_f1
        ));
    })?;
    io_result?;

    dir.write_report_json("cells.json", &cells)?;
    let tables = TableBuilder { cells: &cells, spec: &spec, trainer: &trainer }.all();
    let mut all_text = String::new();
    for (stem, table) in &tables {
        dir.write_report_text(&format!("{stem}.csv"), &table.to_csv()?)?;
        let text = table.to_text();
        dir.write_report_text(&format!("{stem}.txt"), &text)?;
        all_text.push_str(&text);
        all_text.push('\n');
    }
    dir.write_report_text("tables.txt", &all_text)?;
    say_raw!("{all_text}");
    say!("wrote {}", dir.root.display());
    Ok(())
}

pub fn inspect_episode(args: &InspectArgs) -> Result<()> {
    let cfg = resolve_config(&args.run)?;
    let (_, split) = load_and_split(&cfg.data)?;
    let name: SplitName = args.split.into();
    let side = split.side(name);
    let seed = derive_seed(cfg.seed, side_stream(name));
    let sampler_cfg = match name {
        SplitName::Train => SamplerConfig { seed, ..cfg.sampler.clone() },
        _ => {
            let (c, warning) = eval_sampler_config(&cfg.sampler, side, seed);
            if let Some(w) = warning {
                log::warn!("{w}");
            }
            c
        }
    };
    let sampler = EpisodeSampler::new(side, &sampler_cfg)?;
    let episode = sampler
        .stream(args.index + 1)
        .nth(args.index)
        .expect("stream yields index + 1 episodes")?;
    say!("{}", serde_json::to_string_pretty(&episode.to_json())?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0,0; 0.1,0.2").unwrap(), vec![(0.0, 0.0), (0.1, 0.2)]);
        assert!(parse_grid("0.1").is_err());
        assert!(parse_grid("-1,0").is_err());
        assert!(parse_grid(";").is_err());
    }

    #[test]
    fn flags_override_config() {
        let args = RunArgs {
            n: Some(3),
            beta: Some(0.25),
            no_aux: true,
            no_clip: true,
            class_pool_size: Some(0),
            train_parents: Some(vec!["P0".into(), " ".into()]),
            ..RunArgs::default()
        };
        let mut cfg = RunConfig::default();
        args.apply(&mut cfg);
        assert_eq!(cfg.sampler.n, 3);
        assert_eq!(cfg.loss.beta, 0.25);
        assert!(!cfg.loss.auxiliary);
        assert_eq!(cfg.clip_norm, None);
        assert_eq!(cfg.sampler.class_pool_size, None);
        assert_eq!(cfg.data.split.train_parent_types.len(), 1);
    }
}
