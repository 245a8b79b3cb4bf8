use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use emguard_core::attack::{controlled_shift_attack, ghz_joint_ancilla};
use emguard_core::eavesdrop::{simulate_decoy_round_with, simulate_ghz_round_with, ModePolicy};
use emguard_core::linalg::{C64, ONE, ZERO};
use emguard_core::optimizer::{optimize_attack_with, OptimizerConfig};
use emguard_core::par::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn decoy_rounds(c: &mut Criterion) {
    let atk = controlled_shift_attack(3).unwrap();
    let mut group = c.benchmark_group("decoy_round_1e5");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| simulate_decoy_round_with(&atk, 100_000, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn ghz_rounds(c: &mut Criterion) {
    let eps: Vec<Vec<C64>> = (0..3)
        .map(|j| (0..3).map(|a| if a == j { ONE } else { ZERO }).collect())
        .collect();
    let state = ghz_joint_ancilla(3, 3, &eps).unwrap();
    let mut group = c.benchmark_group("ghz_round_1e5");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| simulate_ghz_round_with(&state, 100_000, ModePolicy::Random, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn optimizer_restarts(c: &mut Criterion) {
    let cfg = OptimizerConfig { restarts: 8, max_evals: 300, detection_cap: 0.01, ..Default::default() };
    let mut group = c.benchmark_group("optimizer_8_restarts");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| optimize_attack_with(&cfg, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, decoy_rounds, ghz_rounds, optimizer_restarts);
criterion_main!(benches);
