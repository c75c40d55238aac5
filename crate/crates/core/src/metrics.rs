//! Evaluation measures and paired significance testing.
//!
//! nMSE is the mean squared error divided by the (population) variance of
//! the targets, so predicting the target mean scores exactly 1. Pooled
//! values concatenate all test instances across tasks; unweighted per-task
//! averages are reported next to them.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::MultiTaskDataset;
use crate::error::{Error, Result};

fn check_pair(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} targets",
            pred.len(),
            actual.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Dimension("empty input".into()));
    }
    Ok(())
}

pub fn mse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(pred, actual)?;
    let sum: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok(sum / pred.len() as f64)
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    mse(pred, actual).map(f64::sqrt)
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

pub fn nmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    let err = mse(pred, actual)?;
    let var = variance(actual);
    if var <= 0.0 {
        return Err(Error::ZeroVariance("targets have zero variance".into()));
    }
    Ok(err / var)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub task_id: String,
    pub n_test: usize,
    pub rmse: f64,
    /// `None` when the task's targets are constant.
    pub nmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Pooled over every test instance.
    pub rmse: f64,
    pub nmse: f64,
    /// Unweighted means of the per-task values.
    pub rmse_task_mean: f64,
    pub nmse_task_mean: Option<f64>,
    pub per_task: Vec<TaskEval>,
}

/// Scores per-task predictions against a dataset's targets.
pub fn evaluate_predictions(preds: &[DVector<f64>], data: &MultiTaskDataset) -> Result<EvalResult> {
    if preds.len() != data.num_tasks() {
        return Err(Error::Dimension(format!(
            "{} prediction vectors for {} tasks",
            preds.len(),
            data.num_tasks()
        )));
    }
    let mut per_task = Vec::with_capacity(preds.len());
    let mut all_pred = Vec::with_capacity(data.num_instances());
    let mut all_y = Vec::with_capacity(data.num_instances());
    for (p, t) in preds.iter().zip(data.tasks()) {
        let (p, y) = (p.as_slice(), t.targets.as_slice());
        per_task.push(TaskEval {
            task_id: t.task_id.clone(),
            n_test: y.len(),
            rmse: rmse(p, y)?,
            nmse: nmse(p, y).ok(),
        });
        all_pred.extend_from_slice(p);
        all_y.extend_from_slice(y);
    }
    let m = per_task.len() as f64;
    let nmse_task_mean = per_task
        .iter()
        .map(|t| t.nmse)
        .sum::<Option<f64>>()
        .map(|s| s / m);
    Ok(EvalResult {
        rmse: rmse(&all_pred, &all_y)?,
        nmse: nmse(&all_pred, &all_y)?,
        rmse_task_mean: per_task.iter().map(|t| t.rmse).sum::<f64>() / m,
        nmse_task_mean,
        per_task,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub mean_diff: f64,
    pub critical: f64,
    pub significant: bool,
    /// Differences have zero spread but nonzero mean; `t` is infinite and
    /// no significance call is made.
    pub degenerate: bool,
}

/// Two-sided Student-t quantile `t_{1−(1−level)/2, df}`.
pub fn t_critical(df: usize, level: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::Parameter(format!("Student t with {df} df: {e}")))?;
    Ok(dist.inverse_cdf(1.0 - (1.0 - level) / 2.0))
}

/// Paired two-sided t-test on `a − b`.
pub fn paired_t_test(a: &[f64], b: &[f64], level: f64) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("{} vs {} paired scores", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Parameter("paired t-test needs at least 2 pairs".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!("level {level} not in (0, 1)")));
    }
    let n = a.len();
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    let critical = t_critical(df, level)?;
    if var == 0.0 {
        return Ok(TTest {
            t: if mean == 0.0 { 0.0 } else { f64::INFINITY.copysign(mean) },
            df,
            mean_diff: mean,
            critical,
            significant: false,
            degenerate: mean != 0.0,
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(TTest {
        t,
        df,
        mean_diff: mean,
        critical,
        significant: t.abs() > critical,
        degenerate: false,
    })
}
