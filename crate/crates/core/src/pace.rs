//! Instance losses and the self-paced weight subproblem.
//!
//! For one task with losses `L_1..L_n` the weights minimize
//!
//! ```text
//! (1/n) w·L − λ‖w‖₁ + (γ/√n)‖w‖₂     over w ∈ [0,1]^n
//! ```
//!
//! Writing `a_j = λ − L_j/n` and `g = γ/√n`, the minimizer is either zero
//! (when `‖a⁺‖₂ ≤ g`, the whole task is dropped) or `w_j = min(1, c·a_j⁺)` for
//! a single scale `c`. With the losses sorted ascending the weights are a
//! prefix of ones (`j ≤ k0`), a band `c·a_j` and a tail of zeros
//! (`j ≥ k1`, the first loss at or above `λn`). The band scale is
//! `c = √(k0 / (g² − p))` where `p = Σ_band a_j²`; the solver scans `k0` once,
//! keeping `p` as a running sum.

pub mod oracle;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dataset::MultiTaskDataset;
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Execution};

/// Per-task squared residuals `L_j^(i) = (y_ij − x_ijᵀ U v_i)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    pub per_task: Vec<DVector<f64>>,
}

impl LossMatrix {
    pub fn num_tasks(&self) -> usize {
        self.per_task.len()
    }

    /// Pooled `L_j^(i) / n_i`.
    pub fn normalized(&self) -> Vec<f64> {
        self.per_task
            .iter()
            .flat_map(|l| {
                let n = l.len() as f64;
                l.iter().map(move |v| v / n)
            })
            .collect()
    }
}

/// Per-task instance weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaceWeights {
    pub per_task: Vec<DVector<f64>>,
}

impl PaceWeights {
    pub fn filled(sizes: &[usize], value: f64) -> Self {
        PaceWeights {
            per_task: sizes.iter().map(|&n| DVector::from_element(n, value)).collect(),
        }
    }

    pub fn ones(sizes: &[usize]) -> Self {
        Self::filled(sizes, 1.0)
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self::filled(sizes, 0.0)
    }

    /// Tasks with at least one nonzero weight.
    pub fn selected_tasks(&self) -> usize {
        self.per_task
            .iter()
            .filter(|w| w.iter().any(|&v| v != 0.0))
            .count()
    }

    /// Euclidean distance between the concatenated weight vectors.
    pub fn distance(&self, other: &PaceWeights) -> f64 {
        self.per_task
            .iter()
            .zip(&other.per_task)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn min_weight(&self) -> f64 {
        self.per_task
            .iter()
            .flat_map(|w| w.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self, sizes: &[usize]) -> Result<()> {
        if self.per_task.len() != sizes.len() {
            return Err(Error::Dimension(format!(
                "{} weight vectors for {} tasks",
                self.per_task.len(),
                sizes.len()
            )));
        }
        for (i, (w, &n)) in self.per_task.iter().zip(sizes).enumerate() {
            if w.len() != n {
                return Err(Error::Dimension(format!(
                    "task {i}: {} weights for {n} instances",
                    w.len()
                )));
            }
            if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Parameter(format!("task {i}: weight outside [0, 1]")));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_factor_shapes(u: &DMatrix<f64>, v: &DMatrix<f64>, data: &MultiTaskDataset) -> Result<()> {
    if u.nrows() != data.dim() {
        return Err(Error::Dimension(format!(
            "U has {} rows, data has d={}",
            u.nrows(),
            data.dim()
        )));
    }
    if v.nrows() != u.ncols() {
        return Err(Error::Dimension(format!(
            "U has k={} columns but V has {} rows",
            u.ncols(),
            v.nrows()
        )));
    }
    if v.ncols() != data.num_tasks() {
        return Err(Error::Dimension(format!(
            "V has {} columns, data has m={}",
            v.ncols(),
            data.num_tasks()
        )));
    }
    Ok(())
}

/// Squared residual of every training instance under `p_i = U v_i`.
pub fn instance_losses(
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    data: &MultiTaskDataset,
    exec: Execution,
) -> Result<LossMatrix> {
    check_factor_shapes(u, v, data)?;
    let per_task = map_indexed(data.num_tasks(), exec, |i| {
        let task = data.task(i);
        let p = u * v.column(i);
        let mut r = &task.features * p - &task.targets;
        r.apply(|e| *e = *e * *e);
        r
    });
    Ok(LossMatrix { per_task })
}

/// The per-task weight objective `(1/n) w·L − λ‖w‖₁ + (γ/√n)‖w‖₂`.
pub fn task_weight_objective(losses: &[f64], weights: &[f64], lambda: f64, gamma: f64) -> f64 {
    let n = losses.len() as f64;
    let lin: f64 = losses.iter().zip(weights).map(|(l, w)| w * (l / n - lambda)).sum();
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    lin + gamma / n.sqrt() * norm
}

/// Bookkeeping from one closed-form solve. Indices are 1-based counts in
/// sorted order: `k0` weights are exactly one, the weights from position
/// `k1` on are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemScan {
    pub k0: usize,
    pub k1: usize,
    pub s_star: usize,
    /// Band scale; zero when the band is empty or the task is dropped.
    pub c_star: f64,
    /// Running sums over the band of the chosen `k0`.
    pub p: f64,
    pub q: f64,
    pub objective: f64,
    pub sorts: usize,
    /// Candidate `k0` values evaluated.
    pub scan_steps: usize,
    /// The task was dropped (all-zero weights).
    pub dropped: bool,
}

fn check_pace(lambda: f64, gamma: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("λ must be finite and >= 0, got {lambda}")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("γ must be finite and >= 0, got {gamma}")));
    }
    Ok(())
}

/// Global minimizer of the per-task weight subproblem.
pub fn solve_task_weights(losses: &[f64], lambda: f64, gamma: f64) -> Result<Vec<f64>> {
    solve_task_weights_traced(losses, lambda, gamma).map(|(w, _)| w)
}

/// Like [`solve_task_weights`], also returning the scan bookkeeping.
///
/// Cost is one stable sort plus linear passes, `O(n log n)` overall.
pub fn solve_task_weights_traced(
    losses: &[f64],
    lambda: f64,
    gamma: f64,
) -> Result<(Vec<f64>, SubproblemScan)> {
    check_pace(lambda, gamma)?;
    if let Some(bad) = losses.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::Parameter(format!("loss {bad} is not finite and nonnegative")));
    }
    let n = losses.len();
    let nf = n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep original index order
    order.sort_by(|&i, &j| losses[i].total_cmp(&losses[j]));
    let a: Vec<f64> = order.iter().map(|&j| lambda - losses[j] / nf).collect();
    let g = gamma / nf.sqrt();

    // k1 - 1 = number of losses strictly below λn
    let positive = a.iter().take_while(|&&v| v > 0.0).count();
    let s_star = a.iter().take_while(|&&v| v >= g).count().min(positive);

    let mut scan = SubproblemScan {
        k0: 0,
        k1: positive + 1,
        s_star,
        c_star: 0.0,
        p: 0.0,
        q: 0.0,
        objective: 0.0,
        sorts: 1,
        scan_steps: 0,
        dropped: true,
    };
    let mut w = vec![0.0; n];
    if positive == 0 {
        return Ok((w, scan));
    }

    if gamma == 0.0 {
        // separable linear objective: take every instance with a_j > 0
        let mut obj = 0.0;
        for (rank, &j) in order.iter().take(positive).enumerate() {
            w[j] = 1.0;
            obj -= a[rank];
        }
        scan.k0 = positive;
        scan.objective = obj;
        scan.dropped = false;
        return Ok((w, scan));
    }

    let g2 = g * g;
    let total_p: f64 = a[..positive].iter().map(|v| v * v).sum();
    if total_p <= g2 {
        // ‖a⁺‖ ≤ g: zero is optimal
        return Ok((w, scan));
    }

    // prefix sums of a over the ones block
    let mut prefix = Vec::with_capacity(positive + 1);
    prefix.push(0.0);
    for v in &a[..positive] {
        prefix.push(prefix.last().unwrap() + v);
    }

    const TOL: f64 = 1e-12;
    let start = s_star.max(1);
    let mut best: Option<(usize, f64, f64, f64, f64)> = None; // (k0, c, p, q, obj)
    let mut fallback: Option<(usize, f64, f64, f64, f64)> = None; // least violation
    // walk k0 downward so p and q only accumulate
    let (mut p, mut q) = (0.0, 0.0);
    for k0 in (start..=positive).rev() {
        if k0 < positive {
            p += a[k0] * a[k0];
            q += a[k0];
        }
        scan.scan_steps += 1;
        let slack = g2 - p;
        if slack <= 0.0 {
            continue;
        }
        let c = (k0 as f64 / slack).sqrt();
        // last one must saturate, first band entry must not
        let ones_ok = c * a[k0 - 1] - 1.0;
        let band_ok = if k0 < positive { 1.0 - c * a[k0] } else { f64::INFINITY };
        let obj = -prefix[k0] + (k0 as f64 * slack).sqrt();
        let violation = (-ones_ok).max(-band_ok).max(0.0);
        if violation <= TOL {
            if best.is_none_or(|b| obj < b.4) {
                best = Some((k0, c, p, q, obj));
            }
        } else if fallback.is_none_or(|f| violation < f.4) {
            fallback = Some((k0, c, p, q, violation));
        }
    }

    let Some((k0, c, p, q, obj)) = best.or(fallback) else {
        return Ok((w, scan));
    };
    for (rank, &j) in order.iter().take(positive).enumerate() {
        w[j] = if rank < k0 {
            1.0
        } else {
            let raw = c * a[rank];
            debug_assert!(
                (-1e-12..=1.0 + 1e-12).contains(&raw),
                "band weight {raw} outside [0, 1]"
            );
            raw.clamp(0.0, 1.0)
        };
    }
    let objective = if best.is_some() {
        obj
    } else {
        task_weight_objective(losses, &w, lambda, gamma)
    };
    scan.k0 = k0;
    scan.c_star = if k0 < positive { c } else { 0.0 };
    scan.p = p;
    scan.q = q;
    scan.objective = objective;
    scan.dropped = false;
    Ok((w, scan))
}

/// Solves the weight subproblem for every task.
pub fn solve_weights(losses: &LossMatrix, lambda: f64, gamma: f64, exec: Execution) -> Result<PaceWeights> {
    check_pace(lambda, gamma)?;
    let per_task = map_indexed(losses.num_tasks(), exec, |i| {
        solve_task_weights(losses.per_task[i].as_slice(), lambda, gamma).map(DVector::from_vec)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(PaceWeights { per_task })
}

/// `−λ Σ_i ‖w^(i)‖₁ + γ Σ_i ‖w^(i)‖₂ / √n_i`.
pub fn regularizer_value(w: &PaceWeights, lambda: f64, gamma: f64) -> f64 {
    w.per_task
        .iter()
        .map(|wi| {
            let n = wi.len() as f64;
            -lambda * wi.lp_norm(1) + gamma * wi.norm() / n.sqrt()
        })
        .sum()
}

/// Writes `task_id,instance_index,loss,weight`, instances sorted by loss
/// within each task.
pub fn write_weight_dump(
    path: impl AsRef<Path>,
    task_ids: &[String],
    losses: &LossMatrix,
    weights: &PaceWeights,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_weight_dump_to(&mut out, task_ids, losses, weights).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_weight_dump_to<W: Write>(
    out: &mut W,
    task_ids: &[String],
    losses: &LossMatrix,
    weights: &PaceWeights,
) -> std::io::Result<()> {
    writeln!(out, "task_id,instance_index,loss,weight")?;
    for ((id, l), w) in task_ids.iter().zip(&losses.per_task).zip(&weights.per_task) {
        let mut idx: Vec<usize> = (0..l.len()).collect();
        idx.sort_by(|&i, &j| l[i].total_cmp(&l[j]));
        for j in idx {
            writeln!(out, "{id},{j},{},{}", l[j], w[j])?;
        }
    }
    Ok(())
}
