use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fsed_core::config::RunConfig;

fn fsed(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsed"))
        .args(args)
        .env("FEWSHOT_ED_OUT", out_root)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn fsed")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Synthetic corpus plus a run config small enough for a few-second train.
fn setup(root: &Path) -> String {
    let o = fsed(
        &["synth", "--num-types", "8", "--types-per-parent", "2", "--mentions-per-type", "30", "--embedding-dim", "8", "--name", "data"],
        root,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let mut cfg = RunConfig::from_json(&fs::read_to_string(root.join("data/run.json")).unwrap()).unwrap();
    cfg.encoder.output_dim = 8;
    cfg.encoder.filters_per_size = 4;
    cfg.encoder.lstm_hidden = 4;
    cfg.encoder.gcn_hidden = 8;
    cfg.sampler.n = 3;
    cfg.sampler.k = 2;
    cfg.iterations = 6;
    cfg.eval_every = 3;
    cfg.eval_episodes = 5;
    let path = root.join("small.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["train", "--help"], &["--version"]] {
        let o = fsed(args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{args:?}");
    }
}

#[test]
fn unknown_subcommand_and_flag_exit_one_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &["train", "--no-such-flag"], &[], &["train", "--iterations", "many"]] {
        let o = fsed(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains("Usage"), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let bad_json = dir.path().join("bad.json");
    fs::write(&bad_json, r#"{"modelFamily": "proto", "bogusField": 1}"#).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--config", "/no/such/config.json"],
        vec!["train", "--config", bad_json.to_str().unwrap()],
        vec!["train", "--config", &cfg, "--family", "transformer"],
        vec!["train", "--config", &cfg, "--encoder", "bert"],
        vec!["train", "--config", &cfg, "--k", "0"],
        vec!["train", "--config", &cfg, "--dropout", "1.5"],
        vec!["train", "--config", &cfg, "--corpus", "/no/such/corpus.jsonl"],
        vec!["train"],
        vec!["grid-search", "--config", &cfg, "--grid", "0.1"],
        vec!["matrix", "--config", &cfg, "--settings", "5by5"],
        vec!["matrix", "--config", &cfg, "--losses", "extra"],
        vec!["evaluate", "--checkpoint", "/no/such.ckpt"],
        vec!["prepare-data", "--config", &cfg, "--train-parents", "NoSuchParent"],
    ];
    for args in cases {
        let o = fsed(&args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let o = fsed(&["train", "--config", &cfg, "--lr", "1e300", "--no-clip", "--name", "boom"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"), "{}", stderr(&o));

    let junk = dir.path().join("junk.ckpt");
    fs::write(&junk, b"not a checkpoint").unwrap();
    let o = fsed(&["evaluate", "--checkpoint", junk.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn train_writes_the_run_layout_under_the_env_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let o = fsed(&["train", "--config", &cfg, "--seed", "3", "--beta", "0.2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("train-proto-cnn-s3");
    for f in ["config.resolved.json", "metrics.csv", "checkpoints/best.ckpt", "checkpoints/last.ckpt", "reports/summary.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let resolved = RunConfig::from_json(&fs::read_to_string(run.join("config.resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved.seed, 3);
    assert_eq!(resolved.loss.beta, 0.2);
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "iteration,lr,loss_total,loss_query,loss_intra,loss_inter,dev_P,dev_R,dev_F1");
    assert_eq!(lines.len(), 7);
    assert!(lines[3].split(',').nth(8).is_some_and(|f| !f.is_empty()));

    // --out beats the environment
    let other = dir.path().join("elsewhere");
    let o = fsed(&["train", "--config", &cfg, "--out", other.to_str().unwrap(), "--name", "x"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(other.join("x/metrics.csv").is_file());
}

#[test]
fn evaluate_prints_a_report_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    assert!(fsed(&["train", "--config", &cfg, "--name", "t"], dir.path()).status.success());
    let ck = dir.path().join("t/checkpoints/best.ckpt");
    let args = ["evaluate", "--checkpoint", ck.to_str().unwrap(), "--split", "dev", "--episodes", "10"];
    let a = fsed(&args, dir.path());
    let b = fsed(&args, dir.path());
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let f1 = report["f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
    assert_eq!(report["episodesEvaluated"], 10);
}

#[test]
fn inspect_episode_shows_an_n_plus_one_way_episode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let o = fsed(&["inspect-episode", "--config", &cfg, "--split", "train", "--index", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let ep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let classes = ep["classMap"].as_array().unwrap();
    assert_eq!(classes.len(), 4);
    assert_eq!(classes[3]["type"], "NULL");
    for cluster in ep["support"].as_array().unwrap() {
        assert_eq!(cluster["mentions"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn prepare_grid_and_matrix_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());

    let o = fsed(&["prepare-data", "--config", &cfg, "--name", "p"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("p/reports/split_manifest.json").is_file());
    assert!(dir.path().join("p/reports/corpus_stats.json").is_file());

    let o = fsed(&["grid-search", "--config", &cfg, "--grid", "0,0;0.1,0.3", "--name", "g"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let g = dir.path().join("g");
    assert_eq!(fs::read_to_string(g.join("reports/grid.csv")).unwrap().lines().count(), 3);
    assert!(g.join("runs/beta0.1_gamma0.3/metrics.csv").is_file());
    assert!(g.join("checkpoints/best.ckpt").is_file());
    assert!(g.join("metrics.csv").is_file());

    let o = fsed(
        &["matrix", "--config", &cfg, "--families", "proto,relation", "--encoders", "gcn", "--settings", "2x2", "--name", "m"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let reports = dir.path().join("m/reports");
    let t1 = fs::read_to_string(reports.join("table1_dev.csv")).unwrap();
    assert_eq!(t1.lines().next().unwrap(), "Model,2+1-way 2-shot / GCN");
    assert_eq!(t1.lines().count(), 3);
    assert!(reports.join("table3_2x2_test.txt").is_file());
    assert!(dir.path().join("m/cells/relation_gcn_2x2_both/metrics.csv").is_file());
}
