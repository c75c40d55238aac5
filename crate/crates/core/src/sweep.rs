//! Benchmark sweep over modes × train ratios × seeds × a `β` grid.
//!
//! Every cell with the same seed sees the same data and the same train/test
//! split. `β` is chosen in one of two ways:
//! * `best_mean` runs every grid value on every seed, then reports each
//!   (mode, ratio) at the `β` with the lowest mean test nMSE.
//! * `validation` splits each cell's training part once more, scores every
//!   grid value on the held-out rows and refits the winner.
//!
//! Finished cells are cached as JSON under a hash of everything that
//! determines their result, so an interrupted sweep resumes where it
//! stopped.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{load_csv, split, CsvSchema, MultiTaskDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{paired_t_test, TTest};
use crate::parallel::{map_indexed, Execution};
use crate::toy::{generate_toy, ToyConfig};
use crate::trainer::{fit, Mode, TrainConfig};

const CACHE_VERSION: u32 = 1;
/// Mixed into the seed of the inner validation split.
const VALIDATION_SALT: u64 = 0x05ee_d0f7_a11d;

pub const DEFAULT_BETA_GRID: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSelection {
    #[default]
    BestMean,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default)]
    pub schema: CsvSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub modes: Vec<Mode>,
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub beta_grid: Vec<f64>,
    pub beta_selection: BetaSelection,
    /// Share of each task's training rows kept for fitting under
    /// `validation` selection.
    pub validation_train_fraction: f64,
    /// Toy generator settings; its seed is replaced by the cell seed.
    pub toy: ToyConfig,
    /// Fixed dataset instead of regenerated toy data.
    pub csv: Option<CsvSource>,
    /// `mode` and `beta` are set per cell.
    pub train: TrainConfig,
    /// Cells run concurrently; 0 uses one per core.
    pub workers: usize,
    pub t_test: bool,
    pub level: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            modes: Mode::ALL.to_vec(),
            ratios: vec![0.05, 0.10, 0.15],
            seeds: (0..10).collect(),
            beta_grid: DEFAULT_BETA_GRID.to_vec(),
            beta_selection: BetaSelection::default(),
            validation_train_fraction: 0.7,
            toy: ToyConfig::default(),
            csv: None,
            train: TrainConfig::default(),
            workers: 0,
            t_test: true,
            level: 0.95,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.modes.is_empty() || self.ratios.is_empty() || self.seeds.is_empty() || self.beta_grid.is_empty() {
            return bad("modes, ratios, seeds and beta_grid must be non-empty".into());
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return bad(format!("train ratio {r} not in (0, 1)"));
        }
        if let Some(b) = self.beta_grid.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return bad(format!("beta {b} must be finite and >= 0"));
        }
        if !(self.validation_train_fraction > 0.0 && self.validation_train_fraction < 1.0) {
            return bad("validation_train_fraction must lie in (0, 1)".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad("level must lie in (0, 1)".into());
        }
        if self.csv.is_none() {
            self.toy.validate()?;
        }
        self.train.validate()
    }

    /// Every fit the sweep runs. Under `validation` selection a cell's `β`
    /// is left open and picked inside the cell.
    pub fn cells(&self) -> Vec<CellKey> {
        let betas: Vec<Option<f64>> = match self.beta_selection {
            BetaSelection::BestMean => self.beta_grid.iter().copied().map(Some).collect(),
            BetaSelection::Validation => vec![None],
        };
        let mut out = Vec::new();
        for &ratio in &self.ratios {
            for &seed in &self.seeds {
                for &mode in &self.modes {
                    for &beta in &betas {
                        out.push(CellKey { mode, ratio, seed, beta });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub mode: Mode,
    pub ratio: f64,
    pub seed: u64,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Mode,
    pub train_ratio: f64,
    pub seed: u64,
    pub rmse: Option<f64>,
    pub nmse: Option<f64>,
    pub beta: Option<f64>,
    /// `ok`, or the error that stopped the cell.
    pub status: String,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    /// First iteration whose weight change was within tolerance.
    pub w_settled_at: Option<usize>,
}

impl CellResult {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(key: &CellKey, err: &Error) -> Self {
        CellResult {
            method: key.mode,
            train_ratio: key.ratio,
            seed: key.seed,
            rmse: None,
            nmse: None,
            beta: key.beta,
            status: format!("error: {err}"),
            iterations: None,
            converged: None,
            w_settled_at: None,
        }
    }
}

/// Training and test data for one seed and ratio.
pub fn cell_data(cfg: &SweepConfig, ratio: f64, seed: u64) -> Result<(MultiTaskDataset, MultiTaskDataset)> {
    let data = match &cfg.csv {
        Some(src) => load_csv(&src.path, &src.schema)?,
        None => {
            let toy = ToyConfig {
                seed,
                ..cfg.toy.clone()
            };
            generate_toy(&toy)?.0
        }
    };
    split(&data, &SplitSpec::new(ratio, seed))
}

fn choose_beta(cfg: &SweepConfig, train_cfg: &TrainConfig, train: &MultiTaskDataset, seed: u64) -> Result<f64> {
    if cfg.beta_grid.len() == 1 {
        return Ok(cfg.beta_grid[0]);
    }
    let inner = SplitSpec::new(cfg.validation_train_fraction, seed ^ VALIDATION_SALT);
    let (fit_part, val_part) = split(train, &inner)?;
    let mut best: Option<(f64, f64)> = None;
    let mut last_err = None;
    for &beta in &cfg.beta_grid {
        let c = TrainConfig { beta, ..train_cfg.clone() };
        let score = fit(&fit_part, &c).and_then(|(s, _)| s.evaluate(&val_part)).map(|e| e.nmse);
        match score {
            Ok(v) if v.is_finite() => {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((beta, v));
                }
            }
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some((beta, _)), _) => Ok(beta),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::Parameter("no beta produced a finite validation score".into())),
    }
}

fn try_cell(cfg: &SweepConfig, key: &CellKey) -> Result<CellResult> {
    let (train, test) = cell_data(cfg, key.ratio, key.seed)?;
    let base = TrainConfig {
        mode: key.mode,
        execution: Execution::Sequential,
        record_snapshots: false,
        ..cfg.train.clone()
    };
    let beta = match key.beta {
        Some(b) => b,
        None => choose_beta(cfg, &base, &train, key.seed)?,
    };
    let (state, report) = fit(&train, &TrainConfig { beta, ..base.clone() })?;
    let eval = state.evaluate(&test)?;
    let w_settled_at = report
        .records
        .iter()
        .find(|r| r.delta_w <= base.tol)
        .map(|r| r.iteration);
    Ok(CellResult {
        method: key.mode,
        train_ratio: key.ratio,
        seed: key.seed,
        rmse: Some(eval.rmse),
        nmse: Some(eval.nmse),
        beta: Some(beta),
        status: "ok".into(),
        iterations: Some(report.iterations()),
        converged: Some(report.termination == crate::trainer::Termination::Converged),
        w_settled_at,
    })
}

/// Runs one cell; failures are captured in the status.
pub fn run_cell(cfg: &SweepConfig, key: &CellKey) -> CellResult {
    try_cell(cfg, key).unwrap_or_else(|e| CellResult::failed(key, &e))
}

/// Hex SHA-256 of everything that determines a cell's result.
pub fn cell_hash(cfg: &SweepConfig, key: &CellKey) -> String {
    #[derive(Serialize)]
    struct Fingerprint<'a> {
        version: u32,
        key: &'a CellKey,
        beta_grid: Option<&'a [f64]>,
        validation_train_fraction: Option<f64>,
        toy: Option<&'a ToyConfig>,
        csv: Option<&'a CsvSource>,
        train: TrainConfig,
    }
    let fp = Fingerprint {
        version: CACHE_VERSION,
        key,
        beta_grid: key.beta.is_none().then_some(&cfg.beta_grid[..]),
        validation_train_fraction: key.beta.is_none().then_some(cfg.validation_train_fraction),
        toy: cfg.csv.is_none().then_some(&cfg.toy),
        csv: cfg.csv.as_ref(),
        // execution mode does not change results
        train: TrainConfig {
            execution: Execution::default(),
            record_snapshots: false,
            mode: key.mode,
            ..cfg.train.clone()
        },
    };
    let bytes = serde_json::to_vec(&fp).expect("fingerprint serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// The `β` reported for one (mode, ratio), with the mean test nMSE of every
/// grid value that finished on at least one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaChoice {
    pub method: Mode,
    pub train_ratio: f64,
    pub beta: f64,
    pub grid_nmse: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Every fit that ran, in [`SweepConfig::cells`] order.
    pub grid: Vec<CellResult>,
    /// One row per (ratio, seed, mode) at the chosen `β`.
    pub rows: Vec<CellResult>,
    /// Empty under `validation` selection.
    pub choices: Vec<BetaChoice>,
    pub computed: usize,
    pub cached: usize,
}

fn load_cached(path: &Path, key: &CellKey) -> Option<CellResult> {
    let text = fs::read_to_string(path).ok()?;
    let cell: CellResult = serde_json::from_str(&text).ok()?;
    let same = cell.method == key.mode
        && cell.train_ratio == key.ratio
        && cell.seed == key.seed
        && (key.beta.is_none() || cell.beta == key.beta);
    same.then_some(cell)
}

/// Lowest mean nMSE among grid values that finished on every seed, falling
/// back to those that finished on any.
fn best_mean_choice(cfg: &SweepConfig, grid: &[CellResult], mode: Mode, ratio: f64) -> BetaChoice {
    let mut stats = Vec::new();
    for &beta in &cfg.beta_grid {
        let scores: Vec<f64> = grid
            .iter()
            .filter(|c| c.method == mode && c.train_ratio == ratio && c.beta == Some(beta) && c.is_ok())
            .filter_map(|c| c.nmse)
            .collect();
        if let Some(ms) = MeanStd::of(&scores) {
            stats.push((beta, ms.mean, scores.len() == cfg.seeds.len()));
        }
    }
    let pick = |complete_only: bool| {
        stats
            .iter()
            .filter(|s| s.2 || !complete_only)
            .fold(None, |best: Option<(f64, f64)>, s| match best {
                Some((_, m)) if m <= s.1 => best,
                _ => Some((s.0, s.1)),
            })
    };
    let beta = pick(true).or_else(|| pick(false)).map_or(cfg.beta_grid[0], |b| b.0);
    BetaChoice {
        method: mode,
        train_ratio: ratio,
        beta,
        grid_nmse: stats.iter().map(|s| (s.0, s.1)).collect(),
    }
}

/// Runs every cell, reusing cached cells from `cache_dir` when given.
pub fn run_sweep(cfg: &SweepConfig, cache_dir: Option<&Path>) -> Result<SweepOutcome> {
    cfg.validate()?;
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let keys = cfg.cells();
    let cache_path = |k: &CellKey| cache_dir.map(|d| d.join(format!("{}.json", cell_hash(cfg, k))));

    let work = || {
        map_indexed(keys.len(), Execution::Parallel, |i| {
            let key = &keys[i];
            let path = cache_path(key);
            if let Some(hit) = path.as_deref().and_then(|p| load_cached(p, key)) {
                return Ok((hit, true));
            }
            let cell = run_cell(cfg, key);
            if let Some(p) = path {
                let json = serde_json::to_string_pretty(&cell).expect("cell serializes");
                fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
            }
            Ok((cell, false))
        })
    };
    let results: Vec<Result<(CellResult, bool)>> = run_with_workers(cfg.workers, work)?;

    let mut grid = Vec::with_capacity(results.len());
    let (mut computed, mut cached) = (0, 0);
    for r in results {
        let (cell, hit) = r?;
        if hit {
            cached += 1;
        } else {
            computed += 1;
        }
        grid.push(cell);
    }

    let (rows, choices) = match cfg.beta_selection {
        BetaSelection::Validation => (grid.clone(), Vec::new()),
        BetaSelection::BestMean => {
            let mut choices = Vec::new();
            for &ratio in &cfg.ratios {
                for &mode in &cfg.modes {
                    choices.push(best_mean_choice(cfg, &grid, mode, ratio));
                }
            }
            let rows = grid
                .iter()
                .filter(|c| {
                    choices.iter().any(|ch| {
                        ch.method == c.method && ch.train_ratio == c.train_ratio && c.beta == Some(ch.beta)
                    })
                })
                .cloned()
                .collect();
            (rows, choices)
        }
    };
    Ok(SweepOutcome {
        grid,
        rows,
        choices,
        computed,
        cached,
    })
}

#[cfg(feature = "parallel")]
fn run_with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn run_with_workers<T: Send>(_workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

pub const RESULTS_HEADER: &str = "method,train_ratio,seed,rmse,nmse,beta,status,iterations,converged";

pub fn write_results_csv_to<W: Write>(out: W, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER.split(','))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in cells {
        w.write_record([
            c.method.name().to_string(),
            c.train_ratio.to_string(),
            c.seed.to_string(),
            opt(c.rmse),
            opt(c.nmse),
            opt(c.beta),
            c.status.clone(),
            c.iterations.map(|v| v.to_string()).unwrap_or_default(),
            c.converged.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<results>", e))?;
    Ok(())
}

pub fn write_results_csv(path: impl AsRef<Path>, cells: &[CellResult]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results_csv_to(file, cells)
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(MeanStd { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub method: Mode,
    pub train_ratio: f64,
    pub completed: usize,
    pub failed: usize,
    pub rmse: Option<MeanStd>,
    pub nmse: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub train_ratio: f64,
    pub baseline: Mode,
    /// Seeds where both methods finished.
    pub pairs: usize,
    /// Test on per-seed nMSE, SPMTL minus baseline.
    pub nmse: Option<TTest>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
    pub comparisons: Vec<Comparison>,
    pub beta_choices: Vec<BetaChoice>,
}

impl Summary {
    pub fn group(&self, method: Mode, ratio: f64) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.method == method && g.train_ratio == ratio)
    }
}

/// Mean ± std per (mode, ratio) over `cells`, plus paired t-tests of SPMTL
/// against each other mode when `t_test` is set.
pub fn summarize(cells: &[CellResult], beta_choices: &[BetaChoice], t_test: bool, level: f64) -> Result<Summary> {
    let mut ratios: Vec<f64> = Vec::new();
    let mut modes: Vec<Mode> = Vec::new();
    for c in cells {
        if !ratios.contains(&c.train_ratio) {
            ratios.push(c.train_ratio);
        }
        if !modes.contains(&c.method) {
            modes.push(c.method);
        }
    }
    let mut groups = Vec::new();
    for &ratio in &ratios {
        for &mode in &modes {
            let these: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.method == mode && c.train_ratio == ratio)
                .collect();
            let ok: Vec<&&CellResult> = these.iter().filter(|c| c.is_ok()).collect();
            let rmse: Vec<f64> = ok.iter().filter_map(|c| c.rmse).collect();
            let nmse: Vec<f64> = ok.iter().filter_map(|c| c.nmse).collect();
            groups.push(GroupSummary {
                method: mode,
                train_ratio: ratio,
                completed: ok.len(),
                failed: these.len() - ok.len(),
                rmse: MeanStd::of(&rmse),
                nmse: MeanStd::of(&nmse),
            });
        }
    }

    let mut comparisons = Vec::new();
    if t_test && modes.contains(&Mode::Spmtl) {
        for &ratio in &ratios {
            let by_seed = |mode: Mode| -> BTreeMap<u64, f64> {
                cells
                    .iter()
                    .filter(|c| c.method == mode && c.train_ratio == ratio && c.is_ok())
                    .filter_map(|c| c.nmse.map(|v| (c.seed, v)))
                    .collect()
            };
            let ours = by_seed(Mode::Spmtl);
            for &baseline in modes.iter().filter(|m| **m != Mode::Spmtl) {
                let theirs = by_seed(baseline);
                let (a, b): (Vec<f64>, Vec<f64>) = ours
                    .iter()
                    .filter_map(|(s, v)| theirs.get(s).map(|w| (*v, *w)))
                    .unzip();
                let (nmse, note) = if a.len() < 2 {
                    (None, Some("fewer than 2 paired seeds".to_string()))
                } else {
                    (Some(paired_t_test(&a, &b, level)?), None)
                };
                comparisons.push(Comparison {
                    train_ratio: ratio,
                    baseline,
                    pairs: a.len(),
                    nmse,
                    note,
                });
            }
        }
    }
    Ok(Summary {
        groups,
        comparisons,
        beta_choices: beta_choices.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SweepConfig {
        SweepConfig {
            ratios: vec![0.3],
            seeds: vec![0, 1],
            beta_grid: vec![0.01, 0.1],
            toy: ToyConfig {
                tasks_per_group: 2,
                instances_per_task: 20,
                dim: 6,
                ..Default::default()
            },
            train: TrainConfig {
                max_iter: 5,
                ..Default::default()
            },
            workers: 2,
            ..Default::default()
        }
    }

    #[test]
    fn factorial_cell_count() {
        let cfg = SweepConfig::default();
        assert_eq!(cfg.cells().len(), 3 * 3 * 10 * 6);
        let val = SweepConfig {
            beta_selection: BetaSelection::Validation,
            ..Default::default()
        };
        assert_eq!(val.cells().len(), 90);
    }

    #[test]
    fn hash_tracks_what_matters() {
        let cfg = tiny();
        let key = cfg.cells()[0];
        let mut other = cfg.clone();
        other.train.execution = Execution::Sequential;
        assert_eq!(cell_hash(&cfg, &key), cell_hash(&other, &key));
        // a fixed-β cell does not depend on the rest of the grid
        other.beta_grid.push(1.0);
        assert_eq!(cell_hash(&cfg, &key), cell_hash(&other, &key));
        let open = CellKey { beta: None, ..key };
        assert_ne!(cell_hash(&cfg, &open), cell_hash(&other, &open));
        other.train.alpha = 50.0;
        assert_ne!(cell_hash(&cfg, &key), cell_hash(&other, &key));
        assert_ne!(cell_hash(&cfg, &key), cell_hash(&cfg, &cfg.cells()[1]));
    }

    #[test]
    fn mean_std_matches_hand_values() {
        let ms = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(ms.mean, 2.5);
        assert!((ms.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(MeanStd::of(&[]).is_none());
    }

    #[test]
    fn failing_cells_are_recorded() {
        let mut cfg = tiny();
        cfg.train.k = 50;
        let out = run_sweep(&cfg, None).unwrap();
        assert_eq!(out.grid.len(), 12);
        assert_eq!(out.rows.len(), 6);
        for c in &out.grid {
            assert!(c.status.starts_with("error:") && c.nmse.is_none());
        }
        let summary = summarize(&out.rows, &out.choices, true, 0.95).unwrap();
        assert!(summary.groups.iter().all(|g| g.failed == 2 && g.nmse.is_none()));
        assert!(summary.comparisons.iter().all(|c| c.nmse.is_none()));
    }

    #[test]
    fn best_mean_picks_lowest_grid_mean() {
        let cfg = tiny();
        let out = run_sweep(&cfg, None).unwrap();
        assert_eq!(out.rows.len(), 6);
        for ch in &out.choices {
            let mean_at = |beta: f64| {
                let v: Vec<f64> = out
                    .grid
                    .iter()
                    .filter(|c| c.method == ch.method && c.beta == Some(beta))
                    .map(|c| c.nmse.unwrap())
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            for &b in &cfg.beta_grid {
                assert!(mean_at(ch.beta) <= mean_at(b));
            }
        }
        for r in &out.rows {
            let ch = out.choices.iter().find(|c| c.method == r.method).unwrap();
            assert_eq!(r.beta, Some(ch.beta));
        }
    }

    #[test]
    fn validation_selection_fills_beta() {
        let cfg = SweepConfig {
            beta_selection: BetaSelection::Validation,
            ..tiny()
        };
        let out = run_sweep(&cfg, None).unwrap();
        assert_eq!(out.rows.len(), 6);
        assert!(out.choices.is_empty());
        for r in &out.rows {
            assert!(r.is_ok());
            assert!(cfg.beta_grid.contains(&r.beta.unwrap()));
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = tiny();
        let a = run_sweep(&cfg, None).unwrap();
        let b = run_sweep(&SweepConfig { workers: 1, ..cfg }, None).unwrap();
        assert_eq!(a.grid, b.grid);
        assert!(a.grid.iter().all(CellResult::is_ok));
    }
}
