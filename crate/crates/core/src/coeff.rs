//! Coefficient update: one proximal-gradient step per task with
//! backtracking and ℓ1 soft-thresholding.

use nalgebra::{allocator::Allocator, DMatrix, DVector, DefaultAllocator, Dim, Matrix, OMatrix, RawStorage};
use serde::{Deserialize, Serialize};

use crate::dataset::{MultiTaskDataset, TaskData};
use crate::error::{Error, Result};
use crate::pace::{check_factor_shapes, PaceWeights};
use crate::parallel::{map_indexed, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxStepConfig {
    pub initial_step: f64,
    /// Step multiplier applied on each failed majorization test.
    pub shrink_factor: f64,
    pub max_backtracks: usize,
    /// ℓ1 penalty on `V`.
    pub beta: f64,
}

impl Default for ProxStepConfig {
    fn default() -> Self {
        ProxStepConfig {
            initial_step: 1.0,
            shrink_factor: 0.5,
            max_backtracks: 50,
            beta: 0.0,
        }
    }
}

impl ProxStepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::Config("initial_step must be positive".into()));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::Config("shrink_factor must lie in (0, 1)".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config("beta must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[inline]
pub fn soft_threshold(x: f64, mu: f64) -> f64 {
    (x.abs() - mu).max(0.0) * x.signum()
}

/// Entrywise `max(|K| − μ, 0)·sgn(K)`.
pub fn shrink<R, C, S>(k: &Matrix<f64, R, C, S>, mu: f64) -> OMatrix<f64, R, C>
where
    R: Dim,
    C: Dim,
    S: RawStorage<f64, R, C>,
    DefaultAllocator: Allocator<R, C>,
{
    debug_assert!(mu >= 0.0);
    k.map(|x| if x == 0.0 { 0.0 } else { soft_threshold(x, mu) })
}

/// Value and gradient of `f(v) = (1/n) Σ_j w_j (y_j − v·z_j)²`, `z_j = Uᵀx_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothPart {
    pub value: f64,
    pub grad: DVector<f64>,
}

/// The task's data projected onto the basis, `Z = X U`.
struct Projected<'a> {
    z: DMatrix<f64>,
    y: &'a DVector<f64>,
    w: &'a DVector<f64>,
    inv_n: f64,
}

impl<'a> Projected<'a> {
    fn new(task: &'a TaskData, u: &DMatrix<f64>, w: &'a DVector<f64>) -> Self {
        Projected {
            z: &task.features * u,
            y: &task.targets,
            w,
            inv_n: 1.0 / task.len() as f64,
        }
    }

    fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.z * v - self.y
    }

    fn value(&self, v: &DVector<f64>) -> f64 {
        let r = self.residual(v);
        self.inv_n * r.iter().zip(self.w.iter()).map(|(e, w)| w * e * e).sum::<f64>()
    }

    fn value_grad(&self, v: &DVector<f64>) -> SmoothPart {
        let r = self.residual(v);
        let wr = r.component_mul(self.w);
        SmoothPart {
            value: self.inv_n * wr.dot(&r),
            grad: self.z.tr_mul(&wr) * (2.0 * self.inv_n),
        }
    }
}

fn check_task(v: &DVector<f64>, u: &DMatrix<f64>, task: &TaskData, w: &DVector<f64>) -> Result<()> {
    if u.nrows() != task.dim() || u.ncols() != v.len() || w.len() != task.len() {
        return Err(Error::Dimension(format!(
            "v has {} entries, U is {:?}, task is {}×{} with {} weights",
            v.len(),
            u.shape(),
            task.len(),
            task.dim(),
            w.len()
        )));
    }
    Ok(())
}

pub fn smooth_value_grad(v: &DVector<f64>, u: &DMatrix<f64>, task: &TaskData, w: &DVector<f64>) -> Result<SmoothPart> {
    check_task(v, u, task, w)?;
    Ok(Projected::new(task, u, w).value_grad(v))
}

/// `shrink(v − s·∇f, β·s)`.
pub fn prox_step(v: &DVector<f64>, grad: &DVector<f64>, step: f64, beta: f64) -> DVector<f64> {
    debug_assert!(step > 0.0);
    let target = v - grad * step;
    shrink(&target, beta * step)
}

#[derive(Debug, Clone)]
pub struct CoeffUpdate {
    pub v: DMatrix<f64>,
    /// Accepted step per task, `None` when backtracking ran out and the
    /// column was left unchanged.
    pub steps: Vec<Option<f64>>,
}

impl CoeffUpdate {
    pub fn exhausted_tasks(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.is_none().then_some(i))
            .collect()
    }
}

fn step_task(
    task: &TaskData,
    u: &DMatrix<f64>,
    w: &DVector<f64>,
    v: &DVector<f64>,
    cfg: &ProxStepConfig,
) -> (DVector<f64>, Option<f64>) {
    let proj = Projected::new(task, u, w);
    let SmoothPart { value, grad } = proj.value_grad(v);
    let mut step = cfg.initial_step;
    for _ in 0..=cfg.max_backtracks {
        let z = prox_step(v, &grad, step, cfg.beta);
        let diff = &z - v;
        let bound = value + grad.dot(&diff) + diff.norm_squared() / (2.0 * step);
        // absorbs roundoff once the step has shrunk to nothing
        if proj.value(&z) <= bound + 4.0 * f64::EPSILON * value.abs() {
            return (z, Some(step));
        }
        step *= cfg.shrink_factor;
    }
    (v.clone(), None)
}

/// One majorized prox-gradient step for every task column of `v_prev`.
pub fn solve_coefficients(
    u: &DMatrix<f64>,
    data: &MultiTaskDataset,
    w: &PaceWeights,
    v_prev: &DMatrix<f64>,
    cfg: &ProxStepConfig,
    exec: Execution,
) -> Result<CoeffUpdate> {
    cfg.validate()?;
    check_factor_shapes(u, v_prev, data)?;
    w.validate(&data.task_sizes())?;
    let cols = map_indexed(data.num_tasks(), exec, |i| {
        let v = v_prev.column(i).into_owned();
        step_task(data.task(i), u, &w.per_task[i], &v, cfg)
    });
    let mut v = v_prev.clone();
    let mut steps = Vec::with_capacity(cols.len());
    for (i, (col, step)) in cols.into_iter().enumerate() {
        v.set_column(i, &col);
        steps.push(step);
    }
    Ok(CoeffUpdate { v, steps })
}

/// `f(v_i) + β‖v_i‖₁` for one task.
pub fn task_coeff_objective(v: &DVector<f64>, u: &DMatrix<f64>, task: &TaskData, w: &DVector<f64>, beta: f64) -> Result<f64> {
    check_task(v, u, task, w)?;
    Ok(Projected::new(task, u, w).value(v) + beta * v.lp_norm(1))
}
