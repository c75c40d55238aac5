use nalgebra::DVector;
use proptest::prelude::*;
use spmtl_core::pace::oracle::oracle_task_weights;
use spmtl_core::pace::{instance_losses, solve_task_weights, task_weight_objective, PaceWeights};
use spmtl_core::parallel::Execution;
use spmtl_core::toy::{generate_toy, ToyConfig};

#[test]
fn exact_model_has_zero_losses() {
    let cfg = ToyConfig {
        sigma_scale: 0.0,
        seed: 11,
        ..Default::default()
    };
    let (data, truth) = generate_toy(&cfg).unwrap();
    let losses = instance_losses(&truth.u_true, &truth.v_true, &data, Execution::Sequential).unwrap();
    assert!(losses.per_task.iter().all(|l| l.iter().all(|&v| v == 0.0)));
}

#[test]
fn mixed_case_matches_oracle() {
    let losses = [0.3, 1.5, 4.0];
    let w = solve_task_weights(&losses, 1.0, 0.5).unwrap();
    let o = oracle_task_weights(&losses, 1.0, 0.5, 200);
    let gap = task_weight_objective(&losses, &w, 1.0, 0.5) - task_weight_objective(&losses, &o, 1.0, 0.5);
    assert!(gap.abs() < 1e-6, "gap {gap}");
}

#[test]
fn hand_cases() {
    assert_eq!(solve_task_weights(&[0.5, 0.6, 0.9], 0.1, 0.4).unwrap(), vec![0.0; 3]);
    assert_eq!(solve_task_weights(&[0.5, 3.0], 1.0, 0.0).unwrap(), vec![1.0, 0.0]);
    assert_eq!(solve_task_weights(&[0.2, 0.4], 1.0, 0.0).unwrap(), vec![1.0, 1.0]);
}

#[test]
fn zero_losses_select_everything() {
    for n in 1..=6 {
        let losses = vec![0.0; n];
        let lambda = 0.7;
        let gamma = 0.5 * lambda * (n as f64).sqrt();
        let w = solve_task_weights(&losses, lambda, gamma).unwrap();
        assert_eq!(w, vec![1.0; n]);
        let o = oracle_task_weights(&losses, lambda, gamma, 200);
        let gap = task_weight_objective(&losses, &w, lambda, gamma) - task_weight_objective(&losses, &o, lambda, gamma);
        assert!(gap <= 1e-9);
    }
}

#[test]
fn selected_tasks_counts_nonzero_rows() {
    let w = PaceWeights {
        per_task: vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.3]),
            DVector::from_vec(vec![1.0]),
        ],
    };
    assert_eq!(w.selected_tasks(), 2);
}

proptest! {
    #[test]
    fn closed_form_is_never_beaten_by_the_oracle(
        losses in prop::collection::vec(0.0f64..5.0, 1..8),
        lambda in 0.01f64..3.0,
        gamma in 0.0f64..3.0,
    ) {
        let w = solve_task_weights(&losses, lambda, gamma).unwrap();
        let o = oracle_task_weights(&losses, lambda, gamma, 60);
        let closed = task_weight_objective(&losses, &w, lambda, gamma);
        let brute = task_weight_objective(&losses, &o, lambda, gamma);
        prop_assert!(brute >= closed - 1e-6, "oracle {brute} below closed form {closed}");
        prop_assert!(w.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
