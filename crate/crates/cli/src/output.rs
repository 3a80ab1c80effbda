//! Run directory layout: `config.resolved.json`, `metrics.csv`,
//! `checkpoints/`, `reports/`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fsed_core::checkpoint::Checkpoint;
use fsed_core::config::RunConfig;
use fsed_core::trainer::{write_metrics_csv, MetricsRow};
use serde::Serialize;

pub const OUT_ENV: &str = "FEWSHOT_ED_OUT";
const DEFAULT_ROOT: &str = "fsed-out";

/// `--out`, else `$FEWSHOT_ED_OUT`, else `./fsed-out`.
pub fn out_root(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT)),
    }
}

#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        for d in [root.clone(), root.join("checkpoints"), root.join("reports")] {
            fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self { root })
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(name)
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    pub fn write_config(&self, cfg: &RunConfig) -> Result<()> {
        write_text(&self.root.join("config.resolved.json"), &cfg.to_json())
    }

    pub fn write_metrics(&self, rows: &[MetricsRow]) -> Result<()> {
        let path = self.root.join("metrics.csv");
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_metrics_csv(rows, std::io::BufWriter::new(file))?;
        Ok(())
    }

    pub fn save_checkpoint(&self, name: &str, ck: &Checkpoint) -> Result<PathBuf> {
        let path = self.checkpoint(name);
        ck.save(&path)?;
        Ok(path)
    }

    pub fn write_report_json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        write_json(&self.report(name), value)
    }

    pub fn write_report_text(&self, name: &str, text: &str) -> Result<()> {
        write_text(&self.report(name), text)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
