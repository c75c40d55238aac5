//! Brute-force reference for the weight subproblem.
//!
//! Shares nothing with the closed-form path except the objective. Used by
//! tests and the acceptance suite; too slow for training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::task_weight_objective;

const RESTARTS: usize = 32;
const POLISH_SWEEPS: usize = 30;

/// Minimizes the per-task weight objective by projected subgradient descent
/// from 32 starts, then polishes each coordinate on a grid down to 1e-4 and
/// finishes with a golden-section line search per coordinate.
///
/// Meant for `n ≤ 12`.
pub fn oracle_task_weights(losses: &[f64], lambda: f64, gamma: f64, iterations: usize) -> Vec<f64> {
    let n = losses.len();
    assert!(n <= 12, "oracle is limited to 12 instances, got {n}");
    if n == 0 {
        return Vec::new();
    }
    let nf = n as f64;
    let a: Vec<f64> = losses.iter().map(|l| lambda - l / nf).collect();
    let g = gamma / nf.sqrt();
    let objective = |w: &[f64]| task_weight_objective(losses, w, lambda, gamma);

    let scale = a.iter().map(|v| v.abs()).fold(g, f64::max).max(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(0x0dd5_eed5);
    let mut best = vec![0.0; n];
    let mut best_obj = objective(&best);

    for restart in 0..RESTARTS {
        let mut w: Vec<f64> = match restart {
            0 => vec![1.0; n],
            1 => vec![0.5; n],
            _ => (0..n).map(|_| rng.random::<f64>()).collect(),
        };
        for t in 0..iterations {
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            let step = 0.5 / (scale * ((t + 1) as f64).sqrt());
            for j in 0..n {
                let sub = -a[j] + if norm > 0.0 { g * w[j] / norm } else { 0.0 };
                w[j] = (w[j] - step * sub).clamp(0.0, 1.0);
            }
            let obj = objective(&w);
            if obj < best_obj {
                best_obj = obj;
                best.copy_from_slice(&w);
            }
        }
    }

    for _ in 0..POLISH_SWEEPS {
        let before = best_obj;
        for j in 0..n {
            let rest: f64 = best
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, v)| v * v)
                .sum();
            let lin_rest: f64 = best
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(i, v)| -a[i] * v)
                .sum();
            let f = |t: f64| lin_rest - a[j] * t + g * (rest + t * t).sqrt();

            // coarse-to-fine grid
            let mut centre = best[j];
            let mut width = 1.0;
            for &h in &[1e-2, 1e-3, 1e-4] {
                let lo = (centre - width).max(0.0);
                let hi = (centre + width).min(1.0);
                let steps = ((hi - lo) / h).round() as usize;
                let mut arg = centre;
                let mut val = f(centre);
                for s in 0..=steps {
                    let t = (lo + s as f64 * h).min(1.0);
                    let v = f(t);
                    if v < val {
                        val = v;
                        arg = t;
                    }
                }
                centre = arg;
                width = 2.0 * h;
            }

            // golden section on the bracket left by the grid
            let (mut lo, mut hi) = ((centre - 2e-4).max(0.0), (centre + 2e-4).min(1.0));
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..80 {
                let x1 = hi - phi * (hi - lo);
                let x2 = lo + phi * (hi - lo);
                if f(x1) <= f(x2) {
                    hi = x2;
                } else {
                    lo = x1;
                }
            }
            let mid = 0.5 * (lo + hi);
            let cand = [centre, mid, 0.0, 1.0];
            let t = cand
                .into_iter()
                .min_by(|x, y| f(*x).total_cmp(&f(*y)))
                .unwrap();
            best[j] = t;
        }
        best_obj = objective(&best);
        if before - best_obj < 1e-15 {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_zero_threshold() {
        let w = oracle_task_weights(&[0.5, 3.0], 1.0, 0.0, 200);
        assert_eq!(w, vec![1.0, 0.0]);
        let w = oracle_task_weights(&[0.2, 0.4], 1.0, 0.0, 200);
        assert_eq!(w, vec![1.0, 1.0]);
    }

    #[test]
    fn zero_losses_give_all_ones() {
        // γ < λ√n so every instance is worth including
        let w = oracle_task_weights(&[0.0; 4], 1.0, 1.0, 500);
        for v in w {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }
}
