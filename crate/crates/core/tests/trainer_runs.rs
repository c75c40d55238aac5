use nalgebra::{DMatrix, DVector};
use spmtl_core::dataset::split;
use spmtl_core::pace::PaceWeights;
use spmtl_core::parallel::Execution;
use spmtl_core::toy::{generate_toy, ToyConfig};
use spmtl_core::trainer::objective_value;
use spmtl_core::{fit, ModelState, SplitSpec, TrainConfig};

fn toy_split(seed: u64, ratio: f64) -> spmtl_core::MultiTaskDataset {
    let cfg = ToyConfig {
        seed,
        ..Default::default()
    };
    let (data, _) = generate_toy(&cfg).unwrap();
    split(&data, &SplitSpec::new(ratio, seed)).unwrap().0
}

#[test]
fn auto_pace_starts_with_several_tasks() {
    let (data, _) = generate_toy(&ToyConfig::default()).unwrap();
    let cfg = TrainConfig {
        max_iter: 1,
        ..Default::default()
    };
    let (_, report) = fit(&data, &cfg).unwrap();
    let first = report.records[0].selected_tasks;
    assert!(first >= 6, "only {first} tasks selected at the first iteration");
}

#[test]
fn harder_tasks_join_over_time() {
    let mut monotone = 0;
    for seed in 0..10 {
        let (_, report) = fit(&toy_split(seed, 0.15), &TrainConfig::default()).unwrap();
        let counts: Vec<usize> = report.records.iter().map(|r| r.selected_tasks).collect();
        if counts.windows(2).all(|w| w[0] <= w[1]) {
            monotone += 1;
        }
    }
    assert!(monotone >= 9, "{monotone}/10 seeds nondecreasing");
}

#[test]
fn objective_matches_scalar_loop() {
    let train = toy_split(6, 0.1);
    let (d, k, m) = (train.dim(), 3, train.num_tasks());
    let u = DMatrix::from_fn(d, k, |r, c| ((r * 7 + c * 3) as f64).sin());
    let v = DMatrix::from_fn(k, m, |r, c| ((r * 5 + c) as f64 * 0.37).cos() * 0.5);
    let w = PaceWeights {
        per_task: train
            .tasks()
            .iter()
            .enumerate()
            .map(|(i, t)| DVector::from_fn(t.len(), |j, _| ((i + j) % 4) as f64 / 3.0))
            .collect(),
    };
    let state = ModelState { u, v, w };
    let (alpha, beta, lambda, gamma) = (2.5, 0.3, 0.8, 0.6);
    let got = objective_value(&state, &train, alpha, beta, lambda, gamma, Execution::Parallel).unwrap();

    let mut want = 0.0;
    for (i, t) in train.tasks().iter().enumerate() {
        let n = t.len() as f64;
        let mut sq = 0.0;
        for j in 0..t.len() {
            let mut pred = 0.0;
            for a in 0..d {
                for b in 0..k {
                    pred += t.features[(j, a)] * state.u[(a, b)] * state.v[(b, i)];
                }
            }
            let wj = state.w.per_task[i][j];
            want += wj * (t.targets[j] - pred).powi(2) / n - lambda * wj;
            sq += wj * wj;
        }
        want += gamma * sq.sqrt() / n.sqrt();
    }
    want += alpha * state.u.iter().map(|x| x * x).sum::<f64>();
    want += beta * state.v.iter().map(|x| x.abs()).sum::<f64>();
    assert!((got - want).abs() <= 1e-10 * want.abs(), "{got} vs {want}");
}

#[test]
fn block_updates_never_raise_the_objective() {
    let cfg = TrainConfig::default();
    let (_, report) = fit(&toy_split(0, 0.15), &cfg).unwrap();
    for r in &report.records {
        let slack = |x: f64| 1e-9 * x.abs().max(1.0);
        assert!(r.objective_after_w <= r.objective_start + slack(r.objective_start));
        assert!(r.objective_after_u <= r.objective_after_w + slack(r.objective_after_w));
        assert!(r.objective_after_v <= r.objective_after_u + slack(r.objective_after_u));
    }
}

#[test]
fn sequential_and_parallel_runs_are_identical() {
    let train = toy_split(2, 0.15);
    let seq = TrainConfig {
        execution: Execution::Sequential,
        ..Default::default()
    };
    let par = TrainConfig {
        execution: Execution::Parallel,
        ..Default::default()
    };
    let (a, ra) = fit(&train, &seq).unwrap();
    let (b, rb) = fit(&train, &par).unwrap();
    assert_eq!(a, b);
    assert!(ra.same_trajectory(&rb));
}
