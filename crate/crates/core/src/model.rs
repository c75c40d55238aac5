//! Fitted model state, prediction and JSON persistence.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::MultiTaskDataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_predictions, EvalResult};
use crate::pace::PaceWeights;
use crate::trainer::{PaceSchedule, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Basis `U` (`d × k`), coefficients `V` (`k × m`) and the last instance
/// weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub w: PaceWeights,
}

impl ModelState {
    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn latent(&self) -> usize {
        self.u.ncols()
    }

    pub fn num_tasks(&self) -> usize {
        self.v.ncols()
    }

    /// Task predictor `p_i = U v_i`.
    pub fn predictor(&self, task: usize) -> Result<DVector<f64>> {
        if task >= self.num_tasks() {
            return Err(Error::UnknownTask(task));
        }
        Ok(&self.u * self.v.column(task))
    }

    /// `X (U v_i)` for one task.
    pub fn predict(&self, features: &DMatrix<f64>, task: usize) -> Result<DVector<f64>> {
        let p = self.predictor(task)?;
        if features.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "features have {} columns, model has d={}",
                features.ncols(),
                self.dim()
            )));
        }
        Ok(features * p)
    }

    pub fn predict_dataset(&self, data: &MultiTaskDataset) -> Result<Vec<DVector<f64>>> {
        if data.num_tasks() != self.num_tasks() {
            return Err(Error::Dimension(format!(
                "model has {} tasks, data has {}",
                self.num_tasks(),
                data.num_tasks()
            )));
        }
        data.tasks()
            .iter()
            .enumerate()
            .map(|(i, t)| self.predict(&t.features, i))
            .collect()
    }

    pub fn evaluate(&self, data: &MultiTaskDataset) -> Result<EvalResult> {
        evaluate_predictions(&self.predict_dataset(data)?, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaceValues {
    pub lambda: f64,
    pub gamma: f64,
}

impl From<&PaceSchedule> for PaceValues {
    fn from(p: &PaceSchedule) -> Self {
        PaceValues {
            lambda: p.lambda,
            gamma: p.gamma,
        }
    }
}

/// On-disk model document. Matrices are flat row-major arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedModel {
    pub format_version: u32,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub task_ids: Vec<String>,
    #[serde(rename = "U")]
    pub u: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub final_w: Vec<Vec<f64>>,
    pub config: Option<TrainConfig>,
    pub pace_final: Option<PaceValues>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl SavedModel {
    pub fn new(
        state: &ModelState,
        task_ids: Vec<String>,
        config: Option<TrainConfig>,
        pace_final: Option<PaceValues>,
    ) -> Self {
        SavedModel {
            format_version: FORMAT_VERSION,
            d: state.dim(),
            k: state.latent(),
            m: state.num_tasks(),
            task_ids,
            u: row_major(&state.u),
            v: row_major(&state.v),
            final_w: state.w.per_task.iter().map(|w| w.as_slice().to_vec()).collect(),
            config,
            pace_final,
        }
    }

    /// Checks shapes and rebuilds the in-memory state.
    pub fn to_state(&self) -> Result<ModelState> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format_version {}",
                self.format_version
            )));
        }
        let (d, k, m) = (self.d, self.k, self.m);
        if self.u.len() != d * k {
            return Err(Error::Dimension(format!(
                "U has {} entries, expected d·k = {}",
                self.u.len(),
                d * k
            )));
        }
        if self.v.len() != k * m {
            return Err(Error::Dimension(format!(
                "V has {} entries, expected k·m = {}",
                self.v.len(),
                k * m
            )));
        }
        if self.task_ids.len() != m || self.final_w.len() != m {
            return Err(Error::Dimension(format!(
                "expected {m} task ids and weight vectors, got {} and {}",
                self.task_ids.len(),
                self.final_w.len()
            )));
        }
        if self.u.iter().chain(&self.v).any(|x| !x.is_finite()) {
            return Err(Error::Parameter("model contains non-finite entries".into()));
        }
        let w = PaceWeights {
            per_task: self.final_w.iter().map(|w| DVector::from_vec(w.clone())).collect(),
        };
        if w.per_task.iter().flat_map(|x| x.iter()).any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Parameter("final_w entries must lie in [0, 1]".into()));
        }
        Ok(ModelState {
            u: DMatrix::from_row_slice(d, k, &self.u),
            v: DMatrix::from_row_slice(k, m, &self.v),
            w,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::json(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TaskData;
    use crate::toy::{generate_toy, ToyConfig};

    fn state() -> ModelState {
        ModelState {
            u: DMatrix::from_row_slice(3, 2, &[0.1, 0.2, -0.3, 0.4, 0.5, -0.6]),
            v: DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.5, 2.0]),
            w: PaceWeights::ones(&[2, 1]),
        }
    }

    #[test]
    fn zero_features_predict_zero() {
        let s = state();
        assert_eq!(s.predict(&DMatrix::zeros(4, 3), 1).unwrap(), DVector::zeros(4));
        assert!(matches!(s.predict(&DMatrix::zeros(4, 3), 2), Err(Error::UnknownTask(2))));
        assert!(s.predict(&DMatrix::zeros(4, 2), 0).is_err());
    }

    #[test]
    fn predictions_match_scalar_loop() {
        let s = state();
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 0.0]);
        let got = s.predict(&x, 1).unwrap();
        for r in 0..2 {
            let mut acc = 0.0;
            for c in 0..3 {
                let mut p = 0.0;
                for l in 0..2 {
                    p += s.u[(c, l)] * s.v[(l, 1)];
                }
                acc += x[(r, c)] * p;
            }
            assert!((got[r] - acc).abs() < 1e-14);
        }
    }

    #[test]
    fn ground_truth_reproduces_clean_targets() {
        let cfg = ToyConfig {
            sigma_scale: 0.0,
            tasks_per_group: 2,
            instances_per_task: 6,
            ..Default::default()
        };
        let (data, gt) = generate_toy(&cfg).unwrap();
        let s = ModelState {
            u: gt.u_true,
            v: gt.v_true,
            w: PaceWeights::ones(&data.task_sizes()),
        };
        for (i, t) in data.tasks().iter().enumerate() {
            assert_eq!(s.predict(&t.features, i).unwrap(), t.targets);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = ModelState {
            u: DMatrix::from_fn(3, 2, |r, c| (r as f64 + 0.1).ln() * (c as f64 + std::f64::consts::PI)),
            v: DMatrix::from_fn(2, 2, |r, c| 1.0 / (1.0 + r as f64 * 7.0 + c as f64) / 3.0),
            w: PaceWeights::ones(&[2, 1]),
        };
        let saved = SavedModel::new(&s, vec!["a".into(), "b".into()], None, None);
        let back = SavedModel::from_json(&saved.to_json()).unwrap().to_state().unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn wrong_u_shape_is_rejected() {
        let s = state();
        let mut saved = SavedModel::new(&s, vec!["a".into(), "b".into()], None, None);
        saved.u.pop();
        assert!(matches!(saved.to_state(), Err(Error::Dimension(_))));
    }

    #[test]
    fn evaluate_checks_task_count() {
        let s = state();
        let t = TaskData::new("a", DMatrix::zeros(2, 3), DVector::from_vec(vec![1.0, 2.0]));
        let data = MultiTaskDataset::new(vec![t]).unwrap();
        assert!(s.evaluate(&data).is_err());
    }
}
