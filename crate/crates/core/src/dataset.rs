//! Multi-task regression data: CSV ingestion, validation and seeded
//! per-task train/test splitting.
//!
//! CSV layout is one instance per row with a header
//! `task_id,y,f0,f1,...,f{d-1}`. Tasks are kept in order of first
//! appearance.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training data for a single task: `n_i` rows of `d` features plus targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub task_id: String,
    /// `n_i × d`
    pub features: DMatrix<f64>,
    pub targets: DVector<f64>,
}

impl TaskData {
    pub fn new(task_id: impl Into<String>, features: DMatrix<f64>, targets: DVector<f64>) -> Self {
        TaskData {
            task_id: task_id.into(),
            features,
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Copies out the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> TaskData {
        let features = self.features.select_rows(rows);
        let targets = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.targets[r]));
        TaskData::new(self.task_id.clone(), features, targets)
    }
}

/// An ordered collection of tasks sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskDataset {
    tasks: Vec<TaskData>,
    dim: usize,
}

impl MultiTaskDataset {
    /// Builds a dataset and checks every invariant.
    pub fn new(tasks: Vec<TaskData>) -> Result<Self> {
        let dim = tasks.first().map(TaskData::dim).unwrap_or(0);
        let data = MultiTaskDataset { tasks, dim };
        data.validate()?;
        Ok(data)
    }

    pub fn tasks(&self) -> &[TaskData] {
        &self.tasks
    }

    pub fn task(&self, i: usize) -> &TaskData {
        &self.tasks[i]
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Task count `m`.
    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Total instance count `n`.
    pub fn num_instances(&self) -> usize {
        self.tasks.iter().map(TaskData::len).sum()
    }

    pub fn task_sizes(&self) -> Vec<usize> {
        self.tasks.iter().map(TaskData::len).collect()
    }

    pub fn task_ids(&self) -> Vec<String> {
        self.tasks.iter().map(|t| t.task_id.clone()).collect()
    }

    /// Checks all dataset invariants, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::Invalid {
                task_id: String::new(),
                row: 0,
                msg: "dataset has no tasks".into(),
            });
        }
        for task in &self.tasks {
            let invalid = |row: usize, msg: String| Error::Invalid {
                task_id: task.task_id.clone(),
                row,
                msg,
            };
            if task.is_empty() {
                return Err(invalid(0, "task has no instances".into()));
            }
            if task.features.nrows() != task.targets.len() {
                return Err(invalid(
                    0,
                    format!(
                        "{} feature rows but {} targets",
                        task.features.nrows(),
                        task.targets.len()
                    ),
                ));
            }
            if task.dim() != self.dim {
                return Err(invalid(
                    0,
                    format!("feature width {} differs from {}", task.dim(), self.dim),
                ));
            }
            for r in 0..task.len() {
                if !task.targets[r].is_finite() {
                    return Err(invalid(r, "non-finite target".into()));
                }
                if task.features.row(r).iter().any(|v| !v.is_finite()) {
                    return Err(invalid(r, "non-finite feature".into()));
                }
            }
        }
        Ok(())
    }

    /// Writes the dataset in the `task_id,y,f0,...` CSV layout.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_csv_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "task_id,y")?;
        for j in 0..self.dim {
            write!(out, ",f{j}")?;
        }
        writeln!(out)?;
        for task in &self.tasks {
            for r in 0..task.len() {
                write!(out, "{},{}", task.task_id, task.targets[r])?;
                for v in task.features.row(r).iter() {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Which CSV columns hold the task id, the target and the features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub task_column: String,
    pub target_column: String,
    /// `None` takes every other column, in header order.
    #[serde(default)]
    pub feature_columns: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            task_column: "task_id".into(),
            target_column: "y".into(),
            feature_columns: None,
        }
    }
}

/// Loads a dataset from a headed CSV file. Row numbers in errors are file
/// line numbers (the header is line 1).
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<MultiTaskDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<MultiTaskDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let task_col = find(&schema.task_column)?;
    let target_col = find(&schema.target_column)?;
    let feature_cols: Vec<usize> = match &schema.feature_columns {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..header.len())
            .filter(|&c| c != task_col && c != target_col)
            .collect(),
    };
    if feature_cols.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }
    let width = header.len();
    let d = feature_cols.len();

    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();

    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != width {
            return Err(Error::Structure {
                row: line,
                msg: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let parse = |col: usize| -> Result<f64> {
            let cell = &record[col];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                msg: format!("column `{}`: `{cell}` is not a number", &header[col]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    msg: format!("column `{}`: non-finite value `{cell}`", &header[col]),
                });
            }
            Ok(v)
        };
        let y = parse(target_col)?;
        let x = feature_cols
            .iter()
            .map(|&c| parse(c))
            .collect::<Result<Vec<_>>>()?;
        let id = record[task_col].to_string();
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            rows.push((Vec::new(), Vec::new()));
            rows.len() - 1
        });
        rows[slot].0.extend_from_slice(&x);
        rows[slot].1.push(y);
    }

    let tasks = order
        .into_iter()
        .zip(rows)
        .map(|(id, (x, y))| {
            let n = y.len();
            TaskData::new(id, DMatrix::from_row_slice(n, d, &x), DVector::from_vec(y))
        })
        .collect();
    MultiTaskDataset::new(tasks)
}

/// Per-task random train/test partition parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_ratio: f64, seed: u64) -> Self {
        SplitSpec { train_ratio, seed }
    }

    /// Training instances taken from a task with `n` instances: round half
    /// up, floor of one.
    pub fn train_count(&self, n: usize) -> usize {
        // the small bias keeps products like 0.35 * 10 on the upper side of .5
        let raw = (self.train_ratio * n as f64 + 0.5 + 1e-9).floor() as usize;
        raw.max(1)
    }
}

/// Train/test row indices chosen for each task, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
}

pub fn split_indices(data: &MultiTaskDataset, spec: &SplitSpec) -> Result<SplitIndices> {
    if !(spec.train_ratio > 0.0 && spec.train_ratio < 1.0) {
        return Err(Error::Split(format!(
            "train ratio {} is not in (0, 1)",
            spec.train_ratio
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(data.num_tasks());
    let mut test = Vec::with_capacity(data.num_tasks());
    for task in data.tasks() {
        let n = task.len();
        let n_train = spec.train_count(n);
        if n_train >= n {
            return Err(Error::Split(format!(
                "task {} has {n} instances; ratio {} leaves no test instance",
                task.task_id, spec.train_ratio
            )));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut tr = perm[..n_train].to_vec();
        let mut te = perm[n_train..].to_vec();
        tr.sort_unstable();
        te.sort_unstable();
        train.push(tr);
        test.push(te);
    }
    Ok(SplitIndices { train, test })
}

/// Splits every task independently. The same `(data, spec)` always yields the
/// same partition.
pub fn split(data: &MultiTaskDataset, spec: &SplitSpec) -> Result<(MultiTaskDataset, MultiTaskDataset)> {
    let idx = split_indices(data, spec)?;
    let pick = |sets: &[Vec<usize>]| {
        let tasks = data
            .tasks()
            .iter()
            .zip(sets)
            .map(|(t, rows)| t.select_rows(rows))
            .collect();
        MultiTaskDataset::new(tasks)
    };
    Ok((pick(&idx.train)?, pick(&idx.test)?))
}

/// Per-column z-scoring fitted on one dataset and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Pools all instances. Constant columns get scale 1.
    pub fn fit(data: &MultiTaskDataset) -> Self {
        let d = data.dim();
        let n = data.num_instances() as f64;
        let mut means = vec![0.0; d];
        for t in data.tasks() {
            for (j, col) in t.features.column_iter().enumerate() {
                means[j] += col.sum();
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; d];
        for t in data.tasks() {
            for (j, col) in t.features.column_iter().enumerate() {
                vars[j] += col.iter().map(|v| (v - means[j]).powi(2)).sum::<f64>();
            }
        }
        let scales = vars
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { means, scales }
    }

    pub fn apply(&self, data: &MultiTaskDataset) -> Result<MultiTaskDataset> {
        if data.dim() != self.means.len() {
            return Err(Error::Dimension(format!(
                "standardizer fitted on d={}, data has d={}",
                self.means.len(),
                data.dim()
            )));
        }
        let tasks = data
            .tasks()
            .iter()
            .map(|t| {
                let mut x = t.features.clone();
                for (j, mut col) in x.column_iter_mut().enumerate() {
                    col.apply(|v| *v = (*v - self.means[j]) / self.scales[j]);
                }
                TaskData::new(t.task_id.clone(), x, t.targets.clone())
            })
            .collect();
        MultiTaskDataset::new(tasks)
    }
}
