//! Synthetic benchmark with grouped, partially overlapping latent tasks.
//!
//! Group `g` combines latent basis columns `g` and `g + 1`, so adjacent groups
//! share one basis vector and non-adjacent groups share none. Every task gets
//! its own noise scale `σ_i`, which makes some tasks much harder than others.
//!
//! All draws come from one ChaCha8 stream in a fixed order: `U_true`
//! row-major, then the two coefficients of each task group by group, then
//! per task `σ_i` followed by, per instance, the `d` features and `θ_j`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{MultiTaskDataset, TaskData};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub groups: usize,
    pub tasks_per_group: usize,
    pub instances_per_task: usize,
    pub latent_count: usize,
    pub dim: usize,
    /// Standard deviation of the per-task noise scale `σ_i`.
    pub sigma_scale: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            groups: 3,
            tasks_per_group: 10,
            instances_per_task: 100,
            latent_count: 4,
            dim: 20,
            sigma_scale: 5.0,
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn num_tasks(&self) -> usize {
        self.groups * self.tasks_per_group
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("groups", self.groups),
            ("tasks_per_group", self.tasks_per_group),
            ("instances_per_task", self.instances_per_task),
            ("latent_count", self.latent_count),
            ("dim", self.dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("toy `{name}` must be at least 1")));
            }
        }
        if self.latent_count != self.groups + 1 {
            return Err(Error::Config(format!(
                "toy latent_count must equal groups + 1 ({}), got {}",
                self.groups + 1,
                self.latent_count
            )));
        }
        if !(self.sigma_scale >= 0.0 && self.sigma_scale.is_finite()) {
            return Err(Error::Config("toy sigma_scale must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `dim × latent_count`
    pub u_true: DMatrix<f64>,
    /// `latent_count × m`
    pub v_true: DMatrix<f64>,
    pub group_of_task: Vec<usize>,
    /// Per-task noise scale actually drawn.
    pub sigmas: Vec<f64>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthJson {
    #[serde(rename = "U_true")]
    u_true: Vec<Vec<f64>>,
    #[serde(rename = "V_true")]
    v_true: Vec<Vec<f64>>,
    groups: Vec<usize>,
    sigmas: Vec<f64>,
    seed: u64,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        let doc = GroundTruthJson {
            u_true: rows_of(&self.u_true),
            v_true: rows_of(&self.v_true),
            groups: self.group_of_task.clone(),
            sigmas: self.sigmas.clone(),
            seed: self.seed,
        };
        serde_json::to_string_pretty(&doc).expect("ground truth serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let doc: GroundTruthJson = serde_json::from_str(text)?;
        let conv = |rows: &[Vec<f64>]| {
            from_rows(rows).map_err(|e| serde::de::Error::custom(e.to_string()))
        };
        Ok(GroundTruth {
            u_true: conv(&doc.u_true)?,
            v_true: conv(&doc.v_true)?,
            group_of_task: doc.groups,
            sigmas: doc.sigmas,
            seed: doc.seed,
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Draws a toy dataset and the latent structure that generated it.
pub fn generate_toy(cfg: &ToyConfig) -> Result<(MultiTaskDataset, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.dim;
    let k = cfg.latent_count;
    let m = cfg.num_tasks();
    let n = cfg.instances_per_task;

    let mut normal = || -> f64 { rng.sample(StandardNormal) };

    let u_true = DMatrix::from_row_iterator(d, k, (0..d * k).map(|_| normal()));

    let mut v_true = DMatrix::zeros(k, m);
    let mut group_of_task = Vec::with_capacity(m);
    for g in 0..cfg.groups {
        for t in 0..cfg.tasks_per_group {
            let i = g * cfg.tasks_per_group + t;
            v_true[(g, i)] = normal();
            v_true[(g + 1, i)] = normal();
            group_of_task.push(g);
        }
    }

    let p_true = &u_true * &v_true;
    let mut tasks = Vec::with_capacity(m);
    let mut sigmas = Vec::with_capacity(m);
    for i in 0..m {
        let sigma = cfg.sigma_scale * normal();
        sigmas.push(sigma);
        let mut x = DMatrix::zeros(n, d);
        let mut theta = DVector::zeros(n);
        for r in 0..n {
            for c in 0..d {
                x[(r, c)] = normal();
            }
            theta[r] = normal();
        }
        let clean = &x * p_true.column(i);
        if n >= 2 {
            let mean = clean.mean();
            let var = clean.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            if var <= 0.0 {
                return Err(Error::Config(format!(
                    "task {i} has zero-variance noise-free targets"
                )));
            }
        }
        let y = clean + theta * sigma;
        tasks.push(TaskData::new(format!("t{i}"), x, y));
    }

    let data = MultiTaskDataset::new(tasks)?;
    Ok((
        data,
        GroundTruth {
            u_true,
            v_true,
            group_of_task,
            sigmas,
            seed: cfg.seed,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let (data, gt) = generate_toy(&ToyConfig::default()).unwrap();
        assert_eq!(data.num_tasks(), 30);
        assert_eq!(data.num_instances(), 3000);
        assert_eq!(data.dim(), 20);
        assert_eq!(gt.u_true.shape(), (20, 4));
        assert_eq!(gt.v_true.shape(), (4, 30));
        for (i, col) in gt.v_true.column_iter().enumerate() {
            let nz: Vec<usize> = (0..4).filter(|&r| col[r] != 0.0).collect();
            let g = gt.group_of_task[i];
            assert_eq!(nz, vec![g, g + 1]);
        }
    }

    #[test]
    fn overlapping_supports() {
        let (_, gt) = generate_toy(&ToyConfig::default()).unwrap();
        let support = |i: usize| -> Vec<usize> {
            (0..4).filter(|&r| gt.v_true[(r, i)] != 0.0).collect()
        };
        for a in 0..30 {
            for b in 0..30 {
                let (ga, gb) = (gt.group_of_task[a], gt.group_of_task[b]);
                let shared = support(a).iter().filter(|r| support(b).contains(r)).count();
                match ga.abs_diff(gb) {
                    0 => assert_eq!(shared, 2),
                    1 => assert_eq!(shared, 1),
                    _ => assert_eq!(shared, 0),
                }
            }
        }
    }

    #[test]
    fn noise_free_targets_are_exact() {
        let cfg = ToyConfig {
            sigma_scale: 0.0,
            ..Default::default()
        };
        let (data, gt) = generate_toy(&cfg).unwrap();
        let p = &gt.u_true * &gt.v_true;
        for (i, t) in data.tasks().iter().enumerate() {
            let pred = &t.features * p.column(i);
            assert_eq!(pred, t.targets);
        }
    }

    #[test]
    fn seeded_determinism() {
        let cfg = ToyConfig {
            seed: 11,
            ..Default::default()
        };
        let a = generate_toy(&cfg).unwrap();
        let b = generate_toy(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_toy(&ToyConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.1.u_true, c.1.u_true);
    }

    #[test]
    fn rejects_bad_latent_count() {
        let cfg = ToyConfig {
            latent_count: 5,
            ..Default::default()
        };
        assert!(generate_toy(&cfg).is_err());
    }

    #[test]
    fn ground_truth_json_round_trip() {
        let cfg = ToyConfig {
            tasks_per_group: 2,
            instances_per_task: 5,
            ..Default::default()
        };
        let (_, gt) = generate_toy(&cfg).unwrap();
        let back = GroundTruth::from_json(&gt.to_json()).unwrap();
        assert_eq!(back, gt);
    }
}
