//! JSON run configurations and flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::Value;
use spmtl_core::dataset::CsvSchema;
use spmtl_core::sweep::{CsvSource, SweepConfig};
use spmtl_core::toy::ToyConfig;
use spmtl_core::{Mode, SplitSpec, TrainConfig};

/// Where a run's data comes from.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Toy(ToyConfig),
    Csv(CsvSource),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Toy(ToyConfig::default())
    }
}

/// `train` command settings.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSource,
    /// Without a split the model trains on everything and no test metrics
    /// are reported.
    pub split: Option<SplitSpec>,
    /// Z-score features with statistics of the training part.
    pub standardize: bool,
    pub train: TrainConfig,
}

/// `eval` and `weights-dump` settings.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub schema: CsvSchema,
    /// Standardizer written by `train`, applied to the data before scoring.
    pub standardizer: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub ratio: Option<f64>,
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn decode<T: for<'de> Deserialize<'de>>(value: Value, path: &Path) -> Result<T> {
    serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
}

/// Relative paths inside a config file are taken from the file's directory.
fn anchor(path: &mut PathBuf, config: &Path) {
    if path.is_relative() {
        if let Some(dir) = config.parent() {
            *path = dir.join(&*path);
        }
    }
}

pub fn load_toy(path: Option<&Path>, seed: Option<u64>) -> Result<ToyConfig> {
    let mut cfg = match path {
        Some(p) => decode(read_json(p)?, p)?,
        None => ToyConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_run(path: &Path, ov: Overrides) -> Result<RunConfig> {
    let raw = read_json(path)?;
    let k_given = raw.pointer("/train/k").is_some();
    let mut cfg: RunConfig = decode(raw, path)?;
    if let DataSource::Csv(src) = &mut cfg.data {
        if !k_given {
            bail!("{}: train.k is required for CSV data", path.display());
        }
        anchor(&mut src.path, path);
    }
    if let Some(mode) = ov.mode {
        cfg.train.mode = mode;
    }
    if let Some(seed) = ov.seed {
        if let DataSource::Toy(toy) = &mut cfg.data {
            toy.seed = seed;
        }
        if let Some(split) = &mut cfg.split {
            split.seed = seed;
        }
    }
    if let Some(ratio) = ov.ratio {
        let seed = cfg.split.map_or(ov.seed.unwrap_or(0), |s| s.seed);
        cfg.split = Some(SplitSpec::new(ratio, seed));
    }
    if let DataSource::Toy(toy) = &cfg.data {
        toy.validate()?;
    }
    if let Some(s) = cfg.split {
        if !(s.train_ratio > 0.0 && s.train_ratio < 1.0) {
            bail!("split.train_ratio {} not in (0, 1)", s.train_ratio);
        }
    }
    cfg.train.validate()?;
    Ok(cfg)
}

pub fn load_eval(path: Option<&Path>) -> Result<EvalConfig> {
    let Some(p) = path else {
        return Ok(EvalConfig::default());
    };
    let mut cfg: EvalConfig = decode(read_json(p)?, p)?;
    if let Some(s) = &mut cfg.standardizer {
        anchor(s, p);
    }
    Ok(cfg)
}

/// Flags narrow the sweep to a single mode, ratio or seed.
pub fn load_sweep(path: Option<&Path>, ov: Overrides) -> Result<SweepConfig> {
    let mut cfg: SweepConfig = match path {
        Some(p) => {
            let mut cfg: SweepConfig = decode(read_json(p)?, p)?;
            if let Some(src) = &mut cfg.csv {
                anchor(&mut src.path, p);
            }
            cfg
        }
        None => SweepConfig::default(),
    };
    if let Some(mode) = ov.mode {
        cfg.modes = vec![mode];
    }
    if let Some(ratio) = ov.ratio {
        cfg.ratios = vec![ratio];
    }
    if let Some(seed) = ov.seed {
        cfg.seeds = vec![seed];
    }
    cfg.validate()?;
    Ok(cfg)
}
