//! Built-in invariant checks run by `emguard verify`.

use emguard_core::attack::{
    attack_bell_carrier, attack_ghz_per_particle, controlled_shift_attack, decompose, ghz_joint_ancilla,
    identity_attack, is_undetectable, local_ancilla_attack, param_count, parameterized_attack, random_attack,
    JointAncillaState, UNDETECTABLE_TOL,
};
use emguard_core::constraints::{self, DetConvention};
use emguard_core::eavesdrop::{self, CheckMode, DecoyBasis};
use emguard_core::linalg::{
    self, expm_hermitian, haar_unitary, hermitian_eigs, kron, kron_power, partial_trace, DenseMatrix, C64, ONE, ZERO,
};
use emguard_core::par;
use emguard_core::states::{self, bell_state, ghz_fourier, ghz_state, qft_matrix};
use emguard_core::{DimensionSpec, Sign, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::args::{resolve, usage, Format, VerifyArgs};
use crate::error::CliError;
use crate::output::{emit, fmt_f64, to_json};

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst deviation observed (or the measured quantity).
    pub value: f64,
    pub tolerance: f64,
}

fn within(name: &'static str, value: f64, tolerance: f64) -> CheckResult {
    CheckResult { name, passed: value <= tolerance, value, tolerance }
}

struct Ctx {
    d_max: usize,
    corrupt_qft: bool,
    rng: ChaCha8Rng,
}

impl Ctx {
    fn qft(&self, d: usize) -> DenseMatrix {
        let mut f = qft_matrix(d).expect("d >= 2");
        if self.corrupt_qft {
            f[(0, 0)] += C64::new(1e-3, 0.0);
        }
        f
    }

    fn levels(&self) -> std::ops::RangeInclusive<usize> {
        2..=self.d_max
    }

    /// Levels for checks whose cost grows quickly with d.
    fn small_levels(&self, cap: usize) -> std::ops::RangeInclusive<usize> {
        2..=self.d_max.min(cap)
    }
}

fn unit(dim: usize, k: usize) -> Vec<C64> {
    (0..dim).map(|i| if i == k { ONE } else { ZERO }).collect()
}

fn qft_unitarity(c: &mut Ctx) -> CheckResult {
    let worst = c.levels().map(|d| c.qft(d).unitarity_deviation()).fold(0.0, f64::max);
    within("qft_unitarity", worst, 1e-12)
}

fn qft_square_negates(c: &mut Ctx) -> CheckResult {
    let worst = c
        .levels()
        .map(|d| {
            let f = qft_matrix(d).unwrap();
            let neg = DenseMatrix::from_fn(d, d, |r, col| if r == (d - col) % d { ONE } else { ZERO });
            (&f * &f).max_abs_diff(&neg)
        })
        .fold(0.0, f64::max);
    within("qft_square_negates", worst, 1e-12)
}

fn ghz_normalized(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.small_levels(5) {
        for n in 2..=4 {
            worst = worst.max((ghz_state(d, n).unwrap().norm() - 1.0).abs());
        }
    }
    within("ghz_normalized", worst, 1e-12)
}

fn ghz_fourier_support(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.small_levels(5) {
        for n in 2..=4 {
            let psi = ghz_fourier(d, n).unwrap();
            let dims = DimensionSpec::uniform(d, n).unwrap();
            let target = (d as f64).powf((1.0 - n as f64) / 2.0);
            for (i, z) in psi.amplitudes().iter().enumerate() {
                let on = dims.digits(i).iter().sum::<usize>() % d == 0;
                worst = worst.max(if on { (z.norm() - target).abs() } else { z.norm() });
            }
        }
    }
    within("ghz_fourier_support", worst, 1e-12)
}

fn ghz_fourier_kron_route(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.small_levels(5) {
        for n in 2..=3 {
            let f = kron_power(&qft_matrix(d).unwrap(), n);
            let direct = linalg::apply(&f, &ghz_state(d, n).unwrap()).unwrap();
            worst = worst.max(direct.max_abs_diff(&ghz_fourier(d, n).unwrap()));
        }
    }
    within("ghz_fourier_kron_route", worst, 1e-12)
}

fn bell_orthonormal(_: &mut Ctx) -> CheckResult {
    let states: Vec<StateVector> = [(0, Sign::Plus), (0, Sign::Minus), (1, Sign::Plus), (1, Sign::Minus)]
        .iter()
        .map(|&(b, s)| bell_state(b, s).unwrap())
        .collect();
    let mut worst = 0.0f64;
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate() {
            let want = if i == j { ONE } else { ZERO };
            worst = worst.max((a.inner(b) - want).norm());
        }
    }
    within("bell_orthonormal", worst, 1e-12)
}

fn kron_associative(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let dims: Vec<usize> = (0..3).map(|_| c.rng.random_range(1..4)).collect();
        let m: Vec<DenseMatrix> = dims.iter().map(|&n| haar_unitary(n, &mut c.rng)).collect();
        let left = kron(&kron(&m[0], &m[1]), &m[2]);
        let right = kron(&m[0], &kron(&m[1], &m[2]));
        worst = worst.max(left.max_abs_diff(&right));
    }
    within("kron_associative", worst, 1e-12)
}

fn apply_preserves_norm(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.small_levels(6) {
        let psi = ghz_state(d, 3).unwrap();
        let u = haar_unitary(d * d, &mut c.rng);
        worst = worst.max((psi.apply_on(&[0, 2], &u).unwrap().norm() - 1.0).abs());
    }
    within("apply_preserves_norm", worst, 1e-12)
}

fn partial_trace_of_product(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.small_levels(6) {
        let a = StateVector::new(DimensionSpec::uniform(d, 1).unwrap(), haar_unitary(d, &mut c.rng).column(0)).unwrap();
        let b = StateVector::new(DimensionSpec::uniform(3, 1).unwrap(), haar_unitary(3, &mut c.rng).column(0)).unwrap();
        let rho = a.tensor(&b).unwrap().density();
        let dims = DimensionSpec::new(vec![d, 3]).unwrap();
        worst = worst.max(partial_trace(&rho, &dims, &[0]).unwrap().max_abs_diff(&a.density()));
        worst = worst.max(partial_trace(&rho, &dims, &[1]).unwrap().max_abs_diff(&b.density()));
    }
    within("partial_trace_of_product", worst, 1e-12)
}

fn eig_reconstruction(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for n in [2, 5, 16, 32] {
        let g = haar_unitary(n, &mut c.rng);
        let h = g.add(&linalg::dagger(&g));
        let eig = hermitian_eigs(&h).unwrap();
        let back = eig.map_spectrum(|x| C64::new(x, 0.0));
        worst = worst.max(back.max_abs_diff(&h));
    }
    within("eig_reconstruction", worst, 1e-10)
}

fn rank_nullity(c: &mut Ctx) -> CheckResult {
    let mut mismatches = 0.0;
    for (rows, cols, r) in [(4, 6, 2), (6, 6, 3), (5, 3, 1), (8, 8, 8)] {
        let left = DenseMatrix::from_fn(rows, r, |_, _| C64::new(c.rng.random_range(-1.0..1.0), c.rng.random_range(-1.0..1.0)));
        let right = DenseMatrix::from_fn(r, cols, |_, _| C64::new(c.rng.random_range(-1.0..1.0), c.rng.random_range(-1.0..1.0)));
        let m = &left * &right;
        let rank = linalg::rank(&m, 1e-10);
        let kernel = linalg::nullspace(&m, 1e-10);
        if rank != r || rank + kernel.len() != cols {
            mismatches += 1.0;
        }
    }
    within("rank_nullity", mismatches, 0.0)
}

fn haar_unitarity(c: &mut Ctx) -> CheckResult {
    let worst = (2..=16).map(|n| haar_unitary(n, &mut c.rng).unitarity_deviation()).fold(0.0, f64::max);
    within("haar_unitarity", worst, 1e-10)
}

fn decompose_roundtrip(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.small_levels(4) {
        let atk = random_attack(d, 3, &mut c.rng).unwrap();
        let dec = decompose(&atk);
        for l in 0..d {
            let direct = atk.act_on(&states::basis_state(d, l).unwrap()).unwrap();
            let back = dec.reassemble(l);
            let err = direct.amplitudes().iter().zip(&back).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            worst = worst.max(err);
        }
    }
    within("decompose_roundtrip", worst, 1e-9)
}

fn identity_undetectable(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.small_levels(6) {
        let atk = identity_attack(d, 2).unwrap();
        worst = worst.max(eavesdrop::decoy_average_detection(&atk).unwrap());
        if !is_undetectable(&decompose(&atk), UNDETECTABLE_TOL) {
            worst = f64::INFINITY;
        }
    }
    within("identity_undetectable", worst, 1e-12)
}

fn controlled_shift_detection(_: &mut Ctx) -> CheckResult {
    let atk = controlled_shift_attack(2).unwrap();
    let mut worst = (eavesdrop::decoy_average_detection(&atk).unwrap() - 0.25).abs();
    for k in 0..2 {
        worst = worst.max((eavesdrop::decoy_detection_prob(&atk, DecoyBasis::Fourier, k).unwrap() - 0.5).abs());
        worst = worst.max(eavesdrop::decoy_detection_prob(&atk, DecoyBasis::Computational, k).unwrap());
    }
    within("controlled_shift_detection", worst, 1e-12)
}

fn local_attack_invisible(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.small_levels(4) {
        for d_anc in 2..=4 {
            let atk = local_ancilla_attack(d, &haar_unitary(d_anc, &mut c.rng)).unwrap();
            worst = worst.max(eavesdrop::decoy_average_detection(&atk).unwrap());
            worst = worst.max(eavesdrop::decoy_leakage(&atk).unwrap().abs() * 1e-3);
        }
    }
    within("local_attack_invisible", worst, 1e-12)
}

fn controlled_shift_leakage(c: &mut Ctx) -> CheckResult {
    let worst = c
        .small_levels(5)
        .map(|d| (eavesdrop::decoy_leakage(&controlled_shift_attack(d).unwrap()).unwrap() - (d as f64).log2()).abs())
        .fold(0.0, f64::max);
    within("controlled_shift_leakage", worst, 1e-9)
}

fn bell_carrier_purity(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for b in 0..2u8 {
        for sign in [Sign::Plus, Sign::Minus] {
            let a1 = local_ancilla_attack(2, &haar_unitary(3, &mut c.rng)).unwrap();
            let a2 = local_ancilla_attack(2, &haar_unitary(2, &mut c.rng)).unwrap();
            let psi = attack_bell_carrier(&a1, &a2, b, sign).unwrap();
            worst = worst.max((psi.reduced_density(&[0, 1]).unwrap().purity() - 1.0).abs());
        }
    }
    within("bell_carrier_purity", worst, 1e-9)
}

fn ghz_carrier_unchanged(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.small_levels(4) {
        let atk = local_ancilla_attack(d, &haar_unitary(2, &mut c.rng)).unwrap();
        let psi = attack_ghz_per_particle(&[atk.clone(), atk.clone(), atk], d, 3).unwrap();
        let carrier = psi.reduced_density(&[0, 1, 2]).unwrap();
        worst = worst.max(carrier.max_abs_diff(&ghz_state(d, 3).unwrap().density()));
    }
    within("ghz_carrier_unchanged", worst, 1e-9)
}

fn ghz_equal_eps_invisible(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.small_levels(4) {
        let v = haar_unitary(3, &mut c.rng).column(0);
        let state = ghz_joint_ancilla(d, 3, &vec![v; d]).unwrap();
        for mode in CheckMode::ALL {
            worst = worst.max(eavesdrop::ghz_check_detection(&state, mode).unwrap());
        }
        worst = worst.max(eavesdrop::holevo_leakage(&state).unwrap().abs() * 1e-3);
    }
    within("ghz_equal_eps_invisible", worst, 1e-12)
}

fn ghz_orthogonal_eps(c: &mut Ctx) -> CheckResult {
    let state = ghz_joint_ancilla(2, 2, &[unit(2, 0), unit(2, 1)]).unwrap();
    let mut worst = (eavesdrop::ghz_check_detection(&state, CheckMode::SumModZero).unwrap() - 0.5).abs();
    worst = worst.max(eavesdrop::ghz_check_detection(&state, CheckMode::AllEqual).unwrap());
    for d in c.small_levels(5) {
        let eps: Vec<Vec<C64>> = (0..d).map(|j| unit(d, j)).collect();
        let st = ghz_joint_ancilla(d, 2, &eps).unwrap();
        worst = worst.max((eavesdrop::holevo_leakage(&st).unwrap() - (d as f64).log2()).abs());
    }
    let psi = attack_ghz_per_particle(&[controlled_shift_attack(2).unwrap(), controlled_shift_attack(2).unwrap()], 2, 2).unwrap();
    let via_attack = JointAncillaState::from_per_particle(psi, 2, 2).unwrap();
    worst = worst.max((eavesdrop::ghz_check_detection(&via_attack, CheckMode::SumModZero).unwrap() - 0.5).abs());
    within("ghz_orthogonal_eps", worst, 1e-9)
}

fn constraint_rank(c: &mut Ctx) -> CheckResult {
    let mut bad = 0.0;
    for d in c.levels() {
        for sign in [Sign::Plus, Sign::Minus] {
            let sys = constraints::build_system(d, sign).unwrap();
            if constraints::verify_rank(&sys) != d - 1 || constraints::rank_b(&sys) != d - 1 {
                bad += 1.0;
            }
        }
    }
    within("constraint_rank", bad, 0.0)
}

fn constraint_kernel_all_ones(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.levels() {
        for sign in [Sign::Plus, Sign::Minus] {
            let sys = constraints::build_system(d, sign).unwrap();
            let kernel = linalg::nullspace(sys.a(), constraints::RANK_TOL);
            worst = worst.max(if kernel.len() == 1 { constraints::all_ones_deviation(&kernel[0]) } else { f64::INFINITY });
        }
    }
    within("constraint_kernel_all_ones", worst, 1e-9)
}

fn constraint_det_corrected(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.levels() {
        for sign in [Sign::Plus, Sign::Minus] {
            let numeric = constraints::det_b_numeric(&constraints::build_system(d, sign).unwrap());
            let closed = constraints::det_b_closed_form(d, sign, DetConvention::SignedNodes).unwrap();
            worst = worst.max((closed - numeric).norm() / numeric.norm());
        }
    }
    within("constraint_det_corrected", worst, 1e-9)
}

fn constraint_det_printed_sign(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for d in c.levels() {
        let numeric = constraints::det_b_numeric(&constraints::build_system(d, Sign::Minus).unwrap());
        let printed = constraints::det_b_closed_form(d, Sign::Minus, DetConvention::PositiveNodes).unwrap();
        let expected = if ((d - 1) * (d - 2) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        worst = worst.max((printed / numeric - C64::new(expected, 0.0)).norm());
    }
    within("constraint_det_printed_sign", worst, 1e-9)
}

fn parameterized_zero_is_identity(_: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for (d, d_anc) in [(2, 2), (2, 3), (3, 3)] {
        let atk = parameterized_attack(d, d_anc, &vec![0.0; param_count(d, d_anc)]).unwrap();
        worst = worst.max(atk.unitary().max_abs_diff(&DenseMatrix::identity(d * d_anc)));
    }
    within("parameterized_zero_is_identity", worst, 1e-12)
}

fn expm_unitary(c: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for n in [2, 4, 9, 16] {
        let g = haar_unitary(n, &mut c.rng);
        let h = g.add(&linalg::dagger(&g)).scale(C64::new(3.0, 0.0));
        worst = worst.max(expm_hermitian(&h).unwrap().unitarity_deviation());
    }
    within("expm_unitary", worst, 1e-10)
}

fn monte_carlo_deterministic(_: &mut Ctx) -> CheckResult {
    let atk = controlled_shift_attack(3).unwrap();
    let a = eavesdrop::simulate_decoy_round_with(&atk, 2000, 5, par::Execution::Sequential).unwrap();
    let b = eavesdrop::simulate_decoy_round_with(&atk, 2000, 5, par::Execution::Parallel).unwrap();
    within("monte_carlo_deterministic", if a == b { 0.0 } else { 1.0 }, 0.0)
}

const CHECKS: &[fn(&mut Ctx) -> CheckResult] = &[
    qft_unitarity,
    qft_square_negates,
    ghz_normalized,
    ghz_fourier_support,
    ghz_fourier_kron_route,
    bell_orthonormal,
    kron_associative,
    apply_preserves_norm,
    partial_trace_of_product,
    eig_reconstruction,
    rank_nullity,
    haar_unitarity,
    decompose_roundtrip,
    identity_undetectable,
    controlled_shift_detection,
    local_attack_invisible,
    controlled_shift_leakage,
    bell_carrier_purity,
    ghz_carrier_unchanged,
    ghz_equal_eps_invisible,
    ghz_orthogonal_eps,
    constraint_rank,
    constraint_kernel_all_ones,
    constraint_det_corrected,
    constraint_det_printed_sign,
    parameterized_zero_is_identity,
    expm_unitary,
    monte_carlo_deterministic,
];

pub fn run_checks(d_max: usize, corrupt_qft: bool, seed: u64) -> Vec<CheckResult> {
    let mut ctx = Ctx { d_max, corrupt_qft, rng: ChaCha8Rng::seed_from_u64(seed) };
    CHECKS.iter().map(|check| check(&mut ctx)).collect()
}

pub fn verify(flags: &VerifyArgs) -> Result<(), CliError> {
    let a = resolve(flags, flags.common.config.as_ref())?;
    let d_max = a.d_max.unwrap_or(9);
    if !(2..=16).contains(&d_max) {
        return Err(usage(format!("--d-max must be in 2..=16, got {d_max}")));
    }
    let seed = a.common.seed();
    let results = par::with_threads(a.common.threads, || run_checks(d_max, flags.corrupt_qft, seed));
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.name.to_string()).collect();
    let text = match a.common.format() {
        Format::Json => to_json(&json!({
            "command": "verify",
            "config": { "d_max": d_max, "seed": seed },
            "passed": failed.is_empty(),
            "total": results.len(),
            "failed": failed,
            "checks": results,
        })),
        Format::Csv => {
            let mut out = String::from("check,passed,value,tolerance\n");
            for r in &results {
                out.push_str(&format!("{},{},{},{}\n", r.name, r.passed, fmt_f64(r.value), fmt_f64(r.tolerance)));
            }
            out
        }
    };
    emit(&text, a.common.out.as_deref())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failed))
    }
}
