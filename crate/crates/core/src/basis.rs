//! Latent basis update.
//!
//! With `w` and `V` fixed, `U` minimizes
//! `Σ_i (1/n_i) Σ_j w_ij (y_ij − x_ijᵀ U v_i)² + α‖U‖_F²`, whose optimality
//! condition is the linear system `A(U) = B` with
//!
//! ```text
//! A(U) = Σ_i G_i U v_i v_iᵀ + αU,   G_i = (1/n_i) X_iᵀ diag(w_i) X_i
//! B    = Σ_i (1/n_i) X_iᵀ (w_i ∘ y_i) v_iᵀ
//! ```
//!
//! `A` is the `dk × dk` operator `Σ_i (v_i v_iᵀ) ⊗ G_i + αI` acting on
//! `vec(U)`; it is never formed; conjugate gradient only needs `A(U)`.

use nalgebra::{DMatrix, DVector};

use crate::dataset::MultiTaskDataset;
use crate::error::{Error, Result};
use crate::pace::{check_factor_shapes, PaceWeights};
use crate::parallel::{map_indexed, Execution};

/// The operator `A` with per-task Gram matrices cached for one outer
/// iteration.
#[derive(Debug, Clone)]
pub struct BasisSystem {
    grams: Vec<Option<DMatrix<f64>>>,
    coeffs: Vec<DVector<f64>>,
    alpha: f64,
    rhs: DMatrix<f64>,
    exec: Execution,
}

impl BasisSystem {
    pub fn new(
        data: &MultiTaskDataset,
        w: &PaceWeights,
        v: &DMatrix<f64>,
        alpha: f64,
        exec: Execution,
    ) -> Result<Self> {
        let d = data.dim();
        let k = v.nrows();
        check_factor_shapes(&DMatrix::zeros(d, k), v, data)?;
        w.validate(&data.task_sizes())?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("α must be finite and >= 0, got {alpha}")));
        }
        let parts = map_indexed(data.num_tasks(), exec, |i| {
            let task = data.task(i);
            let wi = &w.per_task[i];
            if wi.iter().all(|&x| x == 0.0) {
                return (None, DVector::zeros(d));
            }
            let inv_n = 1.0 / task.len() as f64;
            let mut weighted = task.features.clone();
            for (mut row, &wj) in weighted.row_iter_mut().zip(wi.iter()) {
                row *= wj * inv_n;
            }
            // (1/n) Xᵀ diag(w) X and (1/n) Xᵀ (w ∘ y)
            let gram = task.features.tr_mul(&weighted);
            let xy = weighted.tr_mul(&task.targets);
            (Some(gram), xy)
        });
        let mut rhs = DMatrix::zeros(d, k);
        let mut grams = Vec::with_capacity(parts.len());
        for (i, (gram, xy)) in parts.into_iter().enumerate() {
            rhs += &xy * v.column(i).transpose();
            grams.push(gram);
        }
        let coeffs = v.column_iter().map(|c| c.into_owned()).collect();
        Ok(BasisSystem {
            grams,
            coeffs,
            alpha,
            rhs,
            exec,
        })
    }

    pub fn dim(&self) -> usize {
        self.rhs.nrows()
    }

    pub fn latent(&self) -> usize {
        self.rhs.ncols()
    }

    pub fn rhs(&self) -> &DMatrix<f64> {
        &self.rhs
    }

    /// `A(U)`.
    pub fn apply(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let contrib = map_indexed(self.grams.len(), self.exec, |i| {
            self.grams[i].as_ref().map(|g| g * (u * &self.coeffs[i]))
        });
        let mut out = u * self.alpha;
        for (gu, v) in contrib.iter().zip(&self.coeffs) {
            if let Some(gu) = gu {
                out += gu * v.transpose();
            }
        }
        out
    }

    /// `⟨U, A(U)⟩ − 2⟨B, U⟩`, the basis objective up to a constant.
    pub fn energy(&self, u: &DMatrix<f64>) -> f64 {
        u.dot(&self.apply(u)) - 2.0 * u.dot(&self.rhs)
    }
}

/// Applies the system operator without keeping the cache.
pub fn apply_system(
    data: &MultiTaskDataset,
    w: &PaceWeights,
    v: &DMatrix<f64>,
    alpha: f64,
    u: &DMatrix<f64>,
    exec: Execution,
) -> Result<DMatrix<f64>> {
    check_factor_shapes(u, v, data)?;
    Ok(BasisSystem::new(data, w, v, alpha, exec)?.apply(u))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSolveOptions {
    /// Relative residual target `‖A(U) − B‖ / ‖B‖`.
    pub tol: f64,
    /// `None` means `10·dk`.
    pub max_iter: Option<usize>,
}

impl Default for BasisSolveOptions {
    fn default() -> Self {
        BasisSolveOptions {
            tol: 1e-8,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BasisSolution {
    pub u: DMatrix<f64>,
    pub iterations: usize,
    /// Final `‖A(U) − B‖_F`, recomputed from scratch.
    pub residual: f64,
}

/// Conjugate gradient on `A(U) = B` from `u0`. Each iterate lowers the
/// basis objective, so a warm start never does worse than `u0`.
pub fn solve_system(system: &BasisSystem, u0: &DMatrix<f64>, opts: &BasisSolveOptions) -> Result<BasisSolution> {
    if system.alpha.is_nan() || system.alpha <= 0.0 {
        return Err(Error::Parameter("basis solve requires α > 0".into()));
    }
    let (d, k) = (system.dim(), system.latent());
    if u0.shape() != (d, k) {
        return Err(Error::Dimension(format!(
            "initial U is {:?}, expected ({d}, {k})",
            u0.shape()
        )));
    }
    let b_norm = system.rhs.norm();
    if b_norm == 0.0 {
        return Ok(BasisSolution {
            u: DMatrix::zeros(d, k),
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = opts.tol * b_norm.max(f64::MIN_POSITIVE);
    let max_iter = opts.max_iter.unwrap_or(10 * d * k);

    let mut u = u0.clone();
    let mut r = &system.rhs - system.apply(&u);
    let mut rr = r.norm_squared();
    let mut p = r.clone();
    let mut iterations = 0;
    while rr.sqrt() > target && iterations < max_iter {
        let ap = system.apply(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            break;
        }
        let step = rr / pap;
        u.zip_apply(&p, |x, d| *x += step * d);
        r.zip_apply(&ap, |x, d| *x -= step * d);
        let rr_next = r.norm_squared();
        let ratio = rr_next / rr;
        p.zip_apply(&r, |x, d| *x = d + ratio * *x);
        rr = rr_next;
        iterations += 1;
        // recurrence drift: refresh the true residual now and then
        if iterations % 50 == 0 {
            r = &system.rhs - system.apply(&u);
            rr = r.norm_squared();
        }
    }
    let residual = (&system.rhs - system.apply(&u)).norm();
    if residual > target {
        return Err(Error::NoConvergence {
            iterations,
            residual: residual / b_norm,
        });
    }
    Ok(BasisSolution {
        u,
        iterations,
        residual,
    })
}

/// Builds the system and solves it from `u0`.
pub fn solve_basis(
    data: &MultiTaskDataset,
    w: &PaceWeights,
    v: &DMatrix<f64>,
    alpha: f64,
    u0: &DMatrix<f64>,
    opts: &BasisSolveOptions,
    exec: Execution,
) -> Result<BasisSolution> {
    let system = BasisSystem::new(data, w, v, alpha, exec)?;
    solve_system(&system, u0, opts)
}

/// Reference solve: assembles the `dk × dk` Kronecker system instance by
/// instance and factorizes it. Limited to `dk ≤ 400`.
pub fn dense_solve_basis(
    data: &MultiTaskDataset,
    w: &PaceWeights,
    v: &DMatrix<f64>,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    let d = data.dim();
    let k = v.nrows();
    check_factor_shapes(&DMatrix::zeros(d, k), v, data)?;
    w.validate(&data.task_sizes())?;
    let dk = d * k;
    if dk > 400 {
        return Err(Error::Parameter(format!("dense solve limited to dk <= 400, got {dk}")));
    }
    let mut mat = DMatrix::<f64>::identity(dk, dk) * alpha;
    let mut rhs = DVector::<f64>::zeros(dk);
    for (i, task) in data.tasks().iter().enumerate() {
        let vi = v.column(i);
        let vvt = vi * vi.transpose();
        let n = task.len() as f64;
        for j in 0..task.len() {
            let c = w.per_task[i][j] / n;
            if c == 0.0 {
                continue;
            }
            let x = task.features.row(j).transpose();
            let xxt = &x * x.transpose();
            mat += vvt.kronecker(&xxt) * c;
            // vec(x vᵀ), column-major
            let xv = &x * vi.transpose();
            rhs += DVector::from_column_slice(xv.as_slice()) * (c * task.targets[j]);
        }
    }
    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("dense basis system is singular".into()))?;
    Ok(DMatrix::from_column_slice(d, k, sol.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TaskData;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, d: usize, k: usize, m: usize, n: usize) -> (MultiTaskDataset, PaceWeights, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = || rng.random::<f64>() * 2.0 - 1.0;
        let tasks = (0..m)
            .map(|i| {
                let x = DMatrix::from_fn(n, d, |_, _| r());
                let y = DVector::from_fn(n, |_, _| r());
                TaskData::new(format!("t{i}"), x, y)
            })
            .collect();
        let data = MultiTaskDataset::new(tasks).unwrap();
        let w = PaceWeights {
            per_task: (0..m).map(|_| DVector::from_fn(n, |_, _| (r() + 1.0) / 2.0)).collect(),
        };
        let v = DMatrix::from_fn(k, m, |_, _| r());
        (data, w, v)
    }

    #[test]
    fn zero_input_and_zero_weights() {
        let (data, w, v) = random_problem(1, 3, 2, 2, 5);
        let z = apply_system(&data, &w, &v, 0.7, &DMatrix::zeros(3, 2), Execution::Sequential).unwrap();
        assert_eq!(z, DMatrix::zeros(3, 2));
        let u = DMatrix::from_fn(3, 2, |r, c| (r + 2 * c) as f64);
        let zw = PaceWeights::zeros(&data.task_sizes());
        let out = apply_system(&data, &zw, &v, 0.7, &u, Execution::Sequential).unwrap();
        assert_eq!(out, &u * 0.7);
    }

    #[test]
    fn matches_explicit_kronecker() {
        let (data, w, v) = random_problem(2, 3, 2, 2, 5);
        let u = DMatrix::from_fn(3, 2, |r, c| 0.3 * r as f64 - 0.5 * c as f64 + 0.1);
        let alpha = 0.4;
        let got = apply_system(&data, &w, &v, alpha, &u, Execution::Parallel).unwrap();
        let mut mat = DMatrix::<f64>::identity(6, 6) * alpha;
        for (i, t) in data.tasks().iter().enumerate() {
            let vi = v.column(i);
            for j in 0..t.len() {
                let x = t.features.row(j).transpose();
                let c = w.per_task[i][j] / t.len() as f64;
                mat += (vi * vi.transpose()).kronecker(&(&x * x.transpose())) * c;
            }
        }
        let expect = &mat * DVector::from_column_slice(u.as_slice());
        for (a, b) in got.as_slice().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let (data, w, v) = random_problem(3, 4, 3, 3, 6);
        let sys = BasisSystem::new(&data, &w, &v, 0.2, Execution::Sequential).unwrap();
        let u1 = DMatrix::from_fn(4, 3, |r, c| ((r * 3 + c) as f64).sin());
        let u2 = DMatrix::from_fn(4, 3, |r, c| ((r + c * 5) as f64).cos());
        let lhs = sys.apply(&u1).dot(&u2);
        let rhs = u1.dot(&sys.apply(&u2));
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn homogeneous_cases_give_zero() {
        let (data, w, v) = random_problem(4, 3, 2, 2, 5);
        let u0 = DMatrix::from_element(3, 2, 1.0);
        let zw = PaceWeights::zeros(&data.task_sizes());
        let sol = solve_basis(&data, &zw, &v, 1.0, &u0, &Default::default(), Execution::Sequential).unwrap();
        assert_eq!(sol.u, DMatrix::zeros(3, 2));

        let tasks = data
            .tasks()
            .iter()
            .map(|t| TaskData::new(t.task_id.clone(), t.features.clone(), DVector::zeros(t.len())))
            .collect();
        let zero_y = MultiTaskDataset::new(tasks).unwrap();
        let sol = solve_basis(&zero_y, &w, &v, 1.0, &u0, &Default::default(), Execution::Sequential).unwrap();
        assert_eq!(sol.u, DMatrix::zeros(3, 2));
        assert_eq!(dense_solve_basis(&data, &zw, &v, 1.0).unwrap(), DMatrix::zeros(3, 2));
    }

    #[test]
    fn scalar_case_by_hand() {
        let (x, y) = (1.5, -0.8);
        let t = TaskData::new("t", DMatrix::from_element(1, 1, x), DVector::from_element(1, y));
        let data = MultiTaskDataset::new(vec![t]).unwrap();
        let w = PaceWeights::ones(&[1]);
        let v = DMatrix::from_element(1, 1, 1.0);
        let u = dense_solve_basis(&data, &w, &v, 0.5).unwrap();
        let expect = y * x / (x * x + 0.5);
        assert!((u[(0, 0)] - expect).abs() < 1e-14);
        let cg = solve_basis(&data, &w, &v, 0.5, &DMatrix::zeros(1, 1), &Default::default(), Execution::Sequential).unwrap();
        assert!((cg.u[(0, 0)] - expect).abs() < 1e-12);
    }

    #[test]
    fn cg_matches_dense_and_lowers_objective() {
        let (data, w, v) = random_problem(5, 5, 3, 4, 7);
        let alpha = 0.3;
        let u0 = DMatrix::from_fn(5, 3, |r, c| (r as f64 - c as f64) * 0.2);
        let opts = BasisSolveOptions {
            tol: 1e-13,
            max_iter: None,
        };
        let sys = BasisSystem::new(&data, &w, &v, alpha, Execution::Sequential).unwrap();
        let sol = solve_system(&sys, &u0, &opts).unwrap();
        let dense = dense_solve_basis(&data, &w, &v, alpha).unwrap();
        assert!((&sol.u - &dense).norm() < 1e-9);
        assert!(sol.residual <= 1e-13 * sys.rhs().norm());
        assert!(sys.energy(&sol.u) <= sys.energy(&u0));
    }

    #[test]
    fn rejects_zero_alpha_and_reports_non_convergence() {
        let (data, w, v) = random_problem(6, 3, 2, 2, 5);
        let u0 = DMatrix::zeros(3, 2);
        let r = solve_basis(&data, &w, &v, 0.0, &u0, &Default::default(), Execution::Sequential);
        assert!(matches!(r, Err(Error::Parameter(_))));
        let opts = BasisSolveOptions {
            tol: 1e-14,
            max_iter: Some(1),
        };
        let r = solve_basis(&data, &w, &v, 0.1, &u0, &opts, Execution::Sequential);
        assert!(matches!(r, Err(Error::NoConvergence { iterations: 1, .. })));
    }
}
