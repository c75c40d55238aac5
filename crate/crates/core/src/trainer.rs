//! Block-coordinate training loop.
//!
//! Each outer iteration updates the instance weights `w` (closed form), the
//! basis `U` (conjugate gradient, warm started) and the coefficients `V`
//! (one majorized prox step), then relaxes the pace: `λ ← λμ1`, `γ ← γ/μ2`.
//! Training stops once all three blocks move by at most `tol`, or after
//! `max_iter` iterations.
//!
//! Three modes share the loop:
//! * `spmtl` paces instances and tasks.
//! * `spiwl` pins `γ = 0`, pacing instances only.
//! * `gomtl` pins `w = 1` and never touches the pace.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{solve_system, BasisSolveOptions, BasisSystem};
use crate::coeff::{solve_coefficients, ProxStepConfig};
use crate::dataset::MultiTaskDataset;
use crate::error::{Error, Result};
use crate::pace::{instance_losses, regularizer_value, solve_task_weights, solve_weights, LossMatrix, PaceWeights};
use crate::parallel::Execution;

pub use crate::model::ModelState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Spmtl,
    Spiwl,
    Gomtl,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Spmtl, Mode::Spiwl, Mode::Gomtl];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Spmtl => "spmtl",
            Mode::Spiwl => "spiwl",
            Mode::Gomtl => "gomtl",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spmtl" => Ok(Mode::Spmtl),
            "spiwl" => Ok(Mode::Spiwl),
            "gomtl" | "go-mtl" => Ok(Mode::Gomtl),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// How the initial `λ₀, γ₀` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum PacePolicy {
    /// `λ₀` is the 60th percentile of the pooled normalized initial losses;
    /// `γ₀` is the largest value keeping at least 20% of tasks selected.
    Auto,
    Explicit { lambda0: f64, gamma0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineSearchConfig {
    pub initial_step: f64,
    pub shrink_factor: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        let p = ProxStepConfig::default();
        LineSearchConfig {
            initial_step: p.initial_step,
            shrink_factor: p.shrink_factor,
            max_backtracks: p.max_backtracks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Number of latent basis tasks.
    pub k: usize,
    /// Frobenius penalty on `U`.
    pub alpha: f64,
    /// ℓ1 penalty on `V`.
    pub beta: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mode: Mode,
    pub pace: PacePolicy,
    /// Ridge strength for the per-task initial fits, scaled by `n_i`.
    pub ridge_strength: f64,
    pub basis_tol: f64,
    pub basis_max_iter: Option<usize>,
    pub line_search: LineSearchConfig,
    pub execution: Execution,
    /// Keep `(U, V, w)` after every iteration in the report.
    pub record_snapshots: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 4,
            alpha: 100.0,
            beta: 0.1,
            max_iter: 50,
            tol: 1e-4,
            mu1: 1.2,
            mu2: 1.2,
            mode: Mode::Spmtl,
            pace: PacePolicy::Auto,
            ridge_strength: 1.0,
            basis_tol: 1e-8,
            basis_max_iter: None,
            line_search: LineSearchConfig::default(),
            execution: Execution::default(),
            record_snapshots: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            // α = 0 leaves the basis system possibly singular
            return bad("alpha must be finite and > 0");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be finite and >= 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be > 0");
        }
        if !(self.mu1 > 1.0 && self.mu2 > 1.0 && self.mu1.is_finite() && self.mu2.is_finite()) {
            return bad("mu1 and mu2 must be finite and > 1");
        }
        if !(self.ridge_strength > 0.0 && self.ridge_strength.is_finite()) {
            return bad("ridge_strength must be finite and > 0");
        }
        if self.basis_tol.is_nan() || self.basis_tol <= 0.0 {
            return bad("basis_tol must be > 0");
        }
        if let PacePolicy::Explicit { lambda0, gamma0 } = self.pace {
            if !(lambda0 >= 0.0 && gamma0 >= 0.0 && lambda0.is_finite() && gamma0.is_finite()) {
                return bad("explicit lambda0 and gamma0 must be finite and >= 0");
            }
        }
        self.prox().validate()
    }

    pub fn prox(&self) -> ProxStepConfig {
        ProxStepConfig {
            initial_step: self.line_search.initial_step,
            shrink_factor: self.line_search.shrink_factor,
            max_backtracks: self.line_search.max_backtracks,
            beta: self.beta,
        }
    }

    fn basis_options(&self) -> BasisSolveOptions {
        BasisSolveOptions {
            tol: self.basis_tol,
            max_iter: self.basis_max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaceSchedule {
    pub lambda: f64,
    pub gamma: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl PaceSchedule {
    /// Admits harder instances (`λ` up) and harder tasks (`γ` down).
    pub fn advance(&mut self, grow_lambda: bool) {
        if grow_lambda {
            self.lambda *= self.mu1;
        }
        self.gamma /= self.mu2;
    }
}

/// Per-task ridge fits `p_i`, then `U₀` = top-`k` left singular vectors of
/// `P = [p_1 … p_m]` and `V₀ = U₀ᵀ P`.
pub fn init_model(train: &MultiTaskDataset, k: usize, ridge_strength: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = train.dim();
    let m = train.num_tasks();
    if k == 0 || k > d.min(m) {
        return Err(Error::Config(format!("k = {k} must lie in 1..=min(d, m) = {}", d.min(m))));
    }
    let mut p = DMatrix::zeros(d, m);
    for (i, task) in train.tasks().iter().enumerate() {
        let x = &task.features;
        let mut gram = x.tr_mul(x);
        let shift = ridge_strength * task.len() as f64;
        for j in 0..d {
            gram[(j, j)] += shift;
        }
        let rhs = x.tr_mul(&task.targets);
        let sol = gram
            .cholesky()
            .ok_or_else(|| Error::Singular(format!("ridge system for task {}", task.task_id)))?
            .solve(&rhs);
        p.set_column(i, &sol);
    }
    let u0 = top_left_singular_vectors(&p, k)?;
    let v0 = u0.tr_mul(&p);
    Ok((u0, v0))
}

/// Leading `k` left singular vectors, each signed so its largest-magnitude
/// entry is positive.
fn top_left_singular_vectors(p: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let svd = p.clone().svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::Singular("SVD did not return left vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(p.nrows(), k);
    for (c, &src) in order.iter().take(k).enumerate() {
        let mut col = u.column(src).into_owned();
        let pivot = col.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
        out.set_column(c, &col);
    }
    Ok(out)
}

/// Result of the initial pace choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaceInit {
    pub lambda0: f64,
    pub gamma0: f64,
    pub selected_tasks: usize,
    pub warning: Option<String>,
}

const LAMBDA_FLOOR: f64 = 1e-6;
const AUTO_PERCENTILE: f64 = 0.6;
const AUTO_TASK_FRACTION: f64 = 0.2;

/// Linear interpolation between order statistics.
fn percentile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
}

fn selected_at(losses: &LossMatrix, lambda: f64, gamma: f64) -> Result<usize> {
    let mut count = 0;
    for l in &losses.per_task {
        let w = solve_task_weights(l.as_slice(), lambda, gamma)?;
        if w.iter().any(|&x| x != 0.0) {
            count += 1;
        }
    }
    Ok(count)
}

/// Chooses `λ₀, γ₀` from losses at the initial model.
pub fn init_pace(losses: &LossMatrix, policy: PacePolicy) -> Result<PaceInit> {
    match policy {
        PacePolicy::Explicit { lambda0, gamma0 } => Ok(PaceInit {
            lambda0,
            gamma0,
            selected_tasks: selected_at(losses, lambda0, gamma0)?,
            warning: None,
        }),
        PacePolicy::Auto => {
            let mut pooled = losses.normalized();
            if pooled.is_empty() {
                return Err(Error::Parameter("no losses to initialize the pace from".into()));
            }
            let mut warning = None;
            let mut lambda0 = percentile(&mut pooled, AUTO_PERCENTILE);
            if lambda0.is_nan() || lambda0 <= 0.0 {
                lambda0 = LAMBDA_FLOOR;
                warning = Some(format!("initial losses are degenerate; λ₀ floored at {LAMBDA_FLOOR}"));
            }
            let m = losses.num_tasks();
            let needed = ((AUTO_TASK_FRACTION * m as f64).ceil() as usize).max(1);
            let max_n = losses.per_task.iter().map(|l| l.len()).max().unwrap_or(1);
            let hi_bound = lambda0 * (max_n as f64).sqrt();

            let gamma0 = if selected_at(losses, lambda0, hi_bound)? >= needed {
                hi_bound
            } else if selected_at(losses, lambda0, 0.0)? < needed {
                warning.get_or_insert_with(|| {
                    format!("fewer than {needed} tasks selectable at γ = 0")
                });
                0.0
            } else {
                let (mut lo, mut hi) = (0.0, hi_bound);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if selected_at(losses, lambda0, mid)? >= needed {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            };
            Ok(PaceInit {
                lambda0,
                gamma0,
                selected_tasks: selected_at(losses, lambda0, gamma0)?,
                warning,
            })
        }
    }
}

/// The full training objective at `(λ, γ)`:
/// `Σ_i (1/n_i) w_i·L_i + α‖U‖_F² + β‖V‖₁ − λΣ‖w_i‖₁ + γΣ‖w_i‖₂/√n_i`.
pub fn objective_value(
    state: &ModelState,
    data: &MultiTaskDataset,
    alpha: f64,
    beta: f64,
    lambda: f64,
    gamma: f64,
    exec: Execution,
) -> Result<f64> {
    let losses = instance_losses(&state.u, &state.v, data, exec)?;
    Ok(objective_from_losses(state, &losses, alpha, beta, lambda, gamma))
}

fn objective_from_losses(state: &ModelState, losses: &LossMatrix, alpha: f64, beta: f64, lambda: f64, gamma: f64) -> f64 {
    let weighted: f64 = state
        .w
        .per_task
        .iter()
        .zip(&losses.per_task)
        .map(|(w, l)| w.dot(l) / l.len() as f64)
        .sum();
    weighted
        + alpha * state.u.norm_squared()
        + beta * state.v.lp_norm(1)
        + regularizer_value(&state.w, lambda, gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

impl Snapshot {
    fn of(state: &ModelState) -> Self {
        Snapshot {
            u: state.u.transpose().as_slice().to_vec(),
            v: state.v.transpose().as_slice().to_vec(),
            w: state.w.per_task.iter().map(|w| w.as_slice().to_vec()).collect(),
        }
    }
}

/// One outer iteration. Objectives are all evaluated at this iteration's
/// `(λ, γ)`, before the pace update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub objective_start: f64,
    pub objective_after_w: f64,
    pub objective_after_u: f64,
    pub objective_after_v: f64,
    pub delta_w: f64,
    pub delta_u: f64,
    pub delta_v: f64,
    pub selected_tasks: usize,
    pub basis_iterations: usize,
    /// Tasks whose V step ran out of backtracks and kept their column.
    pub exhausted_tasks: Vec<usize>,
    pub lambda_capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub mode: Mode,
    pub pace_init: Option<PaceInit>,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub pace_final: PaceSchedule,
    pub snapshots: Option<Vec<Snapshot>>,
    pub wall_time_secs: f64,
}

impl FitReport {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Equality of everything except wall time.
    pub fn same_trajectory(&self, other: &FitReport) -> bool {
        self.mode == other.mode
            && self.pace_init == other.pace_init
            && self.records == other.records
            && self.termination == other.termination
            && self.pace_final == other.pace_final
            && self.snapshots == other.snapshots
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

const SATURATED: f64 = 1.0 - 1e-9;

/// Trains on `train` and returns the final state and the iteration trace.
pub fn fit(train: &MultiTaskDataset, cfg: &TrainConfig) -> Result<(ModelState, FitReport)> {
    let start = Instant::now();
    cfg.validate()?;
    train.validate()?;
    let exec = cfg.execution;
    let sizes = train.task_sizes();
    let (u0, v0) = init_model(train, cfg.k, cfg.ridge_strength)?;
    let mut state = ModelState {
        u: u0,
        v: v0,
        w: PaceWeights::ones(&sizes),
    };
    let mut losses = instance_losses(&state.u, &state.v, train, exec)?;

    let (pace_init, lambda0, gamma0) = match cfg.mode {
        Mode::Gomtl => (None, 0.0, 0.0),
        Mode::Spmtl => {
            let init = init_pace(&losses, cfg.pace)?;
            let (l, g) = (init.lambda0, init.gamma0);
            (Some(init), l, g)
        }
        Mode::Spiwl => {
            let policy = match cfg.pace {
                PacePolicy::Explicit { lambda0, .. } => PacePolicy::Explicit { lambda0, gamma0: 0.0 },
                PacePolicy::Auto => PacePolicy::Auto,
            };
            let mut init = init_pace(&losses, policy)?;
            init.gamma0 = 0.0;
            init.selected_tasks = selected_at(&losses, init.lambda0, 0.0)?;
            let l = init.lambda0;
            (Some(init), l, 0.0)
        }
    };
    let mut pace = PaceSchedule {
        lambda: lambda0,
        gamma: gamma0,
        mu1: cfg.mu1,
        mu2: cfg.mu2,
    };
    let paced = cfg.mode != Mode::Gomtl;
    let prox = cfg.prox();
    let basis_opts = cfg.basis_options();

    let mut records = Vec::new();
    let mut snapshots = cfg.record_snapshots.then(Vec::new);
    let mut termination = Termination::MaxIterations;

    for iteration in 1..=cfg.max_iter {
        let at = |e: Error| Error::AtIteration {
            iteration,
            source: Box::new(e),
        };
        let (lambda, gamma) = (pace.lambda, pace.gamma);
        let objective_start = objective_from_losses(&state, &losses, cfg.alpha, cfg.beta, lambda, gamma);

        let w_new = if paced {
            solve_weights(&losses, lambda, gamma, exec).map_err(at)?
        } else {
            state.w.clone()
        };
        let delta_w = w_new.distance(&state.w);
        state.w = w_new;
        let objective_after_w = objective_from_losses(&state, &losses, cfg.alpha, cfg.beta, lambda, gamma);

        let system = BasisSystem::new(train, &state.w, &state.v, cfg.alpha, exec).map_err(at)?;
        let sol = solve_system(&system, &state.u, &basis_opts).map_err(at)?;
        let delta_u = (&sol.u - &state.u).norm();
        state.u = sol.u;
        losses = instance_losses(&state.u, &state.v, train, exec).map_err(at)?;
        let objective_after_u = objective_from_losses(&state, &losses, cfg.alpha, cfg.beta, lambda, gamma);

        let update = solve_coefficients(&state.u, train, &state.w, &state.v, &prox, exec).map_err(at)?;
        let delta_v = (&update.v - &state.v).norm();
        state.v = update.v.clone();
        losses = instance_losses(&state.u, &state.v, train, exec).map_err(at)?;
        let objective_after_v = objective_from_losses(&state, &losses, cfg.alpha, cfg.beta, lambda, gamma);

        let lambda_capped = paced && state.w.min_weight() >= SATURATED;
        if paced {
            pace.advance(!lambda_capped);
        }

        records.push(IterationRecord {
            iteration,
            lambda,
            gamma,
            objective_start,
            objective_after_w,
            objective_after_u,
            objective_after_v,
            delta_w,
            delta_u,
            delta_v,
            selected_tasks: state.w.selected_tasks(),
            basis_iterations: sol.iterations,
            exhausted_tasks: update.exhausted_tasks(),
            lambda_capped,
        });
        if let Some(s) = snapshots.as_mut() {
            s.push(Snapshot::of(&state));
        }

        if delta_w <= cfg.tol && delta_u <= cfg.tol && delta_v <= cfg.tol {
            termination = Termination::Converged;
            break;
        }
    }

    let report = FitReport {
        mode: cfg.mode,
        pace_init,
        records,
        termination,
        pace_final: pace,
        snapshots,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((state, report))
}

/// Per-task ridge predictors used for initialization, exposed for
/// diagnostics.
pub fn ridge_predictors(train: &MultiTaskDataset, ridge_strength: f64) -> Result<Vec<DVector<f64>>> {
    let d = train.dim();
    train
        .tasks()
        .iter()
        .map(|task| {
            let x = &task.features;
            let mut gram = x.tr_mul(x);
            for j in 0..d {
                gram[(j, j)] += ridge_strength * task.len() as f64;
            }
            gram.cholesky()
                .map(|c| c.solve(&x.tr_mul(&task.targets)))
                .ok_or_else(|| Error::Singular(format!("ridge system for task {}", task.task_id)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TaskData;
    use crate::toy::{generate_toy, ToyConfig};
    use crate::SplitSpec;

    fn small_toy(seed: u64) -> MultiTaskDataset {
        let cfg = ToyConfig {
            tasks_per_group: 4,
            instances_per_task: 20,
            seed,
            ..Default::default()
        };
        generate_toy(&cfg).unwrap().0
    }

    #[test]
    fn ridge_recovers_noise_free_weights() {
        let cfg = ToyConfig {
            groups: 1,
            tasks_per_group: 1,
            latent_count: 2,
            instances_per_task: 60,
            dim: 5,
            sigma_scale: 0.0,
            seed: 3,
        };
        let (data, gt) = generate_toy(&cfg).unwrap();
        let truth = &gt.u_true * gt.v_true.column(0);
        let p = ridge_predictors(&data, 1e-12).unwrap();
        assert!((&p[0] - truth).norm() < 1e-6);
    }

    #[test]
    fn full_rank_init_reconstructs_p() {
        let data = small_toy(1);
        let p = ridge_predictors(&data, 1.0).unwrap();
        let p = DMatrix::from_columns(&p);
        let k = data.dim().min(data.num_tasks());
        let (u, v) = init_model(&data, k, 1.0).unwrap();
        assert!((&u * &v - &p).norm() < 1e-8);
        assert!((u.tr_mul(&u) - DMatrix::identity(k, k)).norm() < 1e-10);
    }

    #[test]
    fn init_picks_dominant_directions() {
        // columns along e0, e1, e2 with decreasing norms
        let d = 4;
        let norms = [5.0, 3.0, 1.0];
        let tasks = norms
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let x = DMatrix::<f64>::identity(d, d);
                let mut y = DVector::zeros(d);
                y[i] = s;
                TaskData::new(format!("t{i}"), x, y)
            })
            .collect();
        let data = MultiTaskDataset::new(tasks).unwrap();
        let (u, _) = init_model(&data, 2, 1e-9).unwrap();
        // projection onto span(e0, e1) must be the identity on the columns of u
        for c in 0..2 {
            let col = u.column(c);
            let outside = col[2].powi(2) + col[3].powi(2);
            assert!(outside.sqrt() < 1e-8);
        }
    }

    #[test]
    fn init_rejects_large_k() {
        let data = small_toy(2);
        assert!(matches!(init_model(&data, 13, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn uniform_losses_pace() {
        let losses = LossMatrix {
            per_task: vec![DVector::from_element(4, 2.0); 5],
        };
        let init = init_pace(&losses, PacePolicy::Auto).unwrap();
        assert!((init.lambda0 - 0.5).abs() < 1e-15);
        // a_j = 0 for all instances: nothing can be selected
        assert_eq!(init.gamma0, 0.0);
        assert!(init.warning.is_some());
    }

    #[test]
    fn explicit_pace_passes_through() {
        let losses = LossMatrix {
            per_task: vec![DVector::from_vec(vec![0.1, 0.5]); 2],
        };
        let p = PacePolicy::Explicit { lambda0: 0.5, gamma0: 0.1 };
        let init = init_pace(&losses, p).unwrap();
        assert_eq!((init.lambda0, init.gamma0), (0.5, 0.1));
    }

    #[test]
    fn zero_losses_floor_lambda() {
        let losses = LossMatrix {
            per_task: vec![DVector::zeros(3); 2],
        };
        let init = init_pace(&losses, PacePolicy::Auto).unwrap();
        assert_eq!(init.lambda0, LAMBDA_FLOOR);
        assert!(init.warning.is_some());
        assert_eq!(init.selected_tasks, 2);
    }

    #[test]
    fn objective_trivial_cases() {
        let data = small_toy(4);
        let (d, m) = (data.dim(), data.num_tasks());
        let zero = ModelState {
            u: DMatrix::zeros(d, 2),
            v: DMatrix::zeros(2, m),
            w: PaceWeights::zeros(&data.task_sizes()),
        };
        assert_eq!(objective_value(&zero, &data, 3.0, 2.0, 1.0, 1.0, Execution::Sequential).unwrap(), 0.0);
        let s = ModelState {
            u: DMatrix::from_fn(d, 2, |r, c| (r + c) as f64 * 0.1),
            v: DMatrix::from_fn(2, m, |r, c| r as f64 - c as f64 * 0.2),
            w: PaceWeights::zeros(&data.task_sizes()),
        };
        let got = objective_value(&s, &data, 3.0, 2.0, 1.0, 1.0, Execution::Sequential).unwrap();
        let expect = 3.0 * s.u.norm_squared() + 2.0 * s.v.lp_norm(1);
        assert!((got - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn gomtl_keeps_unit_weights() {
        let data = small_toy(5);
        let (train, _) = crate::dataset::split(&data, &SplitSpec::new(0.5, 0)).unwrap();
        let cfg = TrainConfig {
            mode: Mode::Gomtl,
            max_iter: 5,
            record_snapshots: true,
            ..Default::default()
        };
        let (state, report) = fit(&train, &cfg).unwrap();
        assert!(state.w.per_task.iter().all(|w| w.iter().all(|&x| x == 1.0)));
        for snap in report.snapshots.unwrap() {
            assert!(snap.w.iter().flatten().all(|&x| x == 1.0));
        }
        assert!(report.pace_init.is_none());
    }

    #[test]
    fn fit_is_deterministic_across_execution() {
        let data = small_toy(6);
        let (train, _) = crate::dataset::split(&data, &SplitSpec::new(0.5, 1)).unwrap();
        let mut cfg = TrainConfig {
            max_iter: 8,
            ..Default::default()
        };
        let (s1, r1) = fit(&train, &cfg).unwrap();
        cfg.execution = Execution::Sequential;
        let (s2, r2) = fit(&train, &cfg).unwrap();
        assert_eq!(s1, s2);
        assert!(r1.same_trajectory(&r2));
    }

    #[test]
    fn invalid_config_rejected() {
        let data = small_toy(7);
        for cfg in [
            TrainConfig { k: 0, ..Default::default() },
            TrainConfig { mu1: 1.0, ..Default::default() },
            TrainConfig { tol: 0.0, ..Default::default() },
            TrainConfig { beta: -1.0, ..Default::default() },
        ] {
            assert!(matches!(fit(&data, &cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("SPMTL".parse::<Mode>().unwrap(), Mode::Spmtl);
        assert_eq!("go-mtl".parse::<Mode>().unwrap(), Mode::Gomtl);
        assert!("foo".parse::<Mode>().is_err());
    }
}
