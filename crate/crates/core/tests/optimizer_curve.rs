use emguard_core::optimizer::{optimize_attack_with, tradeoff_curve, tradeoff_curve_with, OptimizerConfig};
use emguard_core::par::Execution;

fn cfg() -> OptimizerConfig {
    OptimizerConfig { d: 2, d_anc: 2, restarts: 4, max_evals: 1000, seed: 17, ..Default::default() }
}

#[test]
fn endpoints_are_far_apart() {
    let curve = tradeoff_curve(&cfg(), &[1.0, 1e-4]).unwrap();
    let gap = curve[0].achieved_leakage_bits - curve[1].achieved_leakage_bits;
    assert!(gap >= 0.5, "gap {gap}");
    assert!(curve[1].feasible);
}

#[test]
fn single_cap_is_unconstrained_point() {
    let curve = tradeoff_curve(&cfg(), &[1.0]).unwrap();
    assert_eq!(curve.len(), 1);
    assert_eq!(curve[0].detection_cap, 1.0);
    assert!(curve[0].feasible);
}

#[test]
fn curve_is_reproducible_across_execution_modes() {
    let caps = [1.0, 0.1, 0.01];
    let seq = tradeoff_curve_with(&cfg(), &caps, Execution::Sequential).unwrap();
    let par = tradeoff_curve_with(&cfg(), &caps, Execution::Parallel).unwrap();
    assert_eq!(serde_json::to_string(&seq).unwrap(), serde_json::to_string(&par).unwrap());
    assert_eq!(seq, tradeoff_curve_with(&cfg(), &caps, Execution::Sequential).unwrap());
}

#[test]
fn different_seeds_explore_differently() {
    let a = optimize_attack_with(&cfg(), Execution::Sequential).unwrap();
    let b = optimize_attack_with(&OptimizerConfig { seed: 18, ..cfg() }, Execution::Sequential).unwrap();
    assert_ne!(a.params, b.params);
}
