use emguard_core::attack::{
    decompose, ghz_joint_ancilla, local_ancilla_attack, param_count, parameterized_attack, params_from_generator,
    generator_from_params, random_attack,
};
use emguard_core::constraints::{build_system, residual, residual_scalar};
use emguard_core::eavesdrop::{
    decoy_average_detection, decoy_case_probabilities, decoy_leakage, ghz_check_detection, holevo_leakage, CheckMode,
};
use emguard_core::linalg::{self, haar_unitary, kron, partial_trace, C64};
use emguard_core::{DimensionSpec, Sign, StateVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(dims: &[usize], rng: &mut ChaCha8Rng) -> StateVector {
    let dims_spec = DimensionSpec::new(dims.to_vec()).unwrap();
    let raw: Vec<C64> = (0..dims_spec.total())
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n = linalg::norm(&raw);
    StateVector::new(dims_spec, raw.iter().map(|z| z / n).collect()).unwrap()
}

fn random_eps(d: usize, d_anc: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<C64>> {
    let raw: Vec<Vec<C64>> = (0..d)
        .map(|_| (0..d_anc).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
        .collect();
    let total: f64 = raw.iter().map(|v| linalg::norm(v).powi(2)).sum();
    let s = (d as f64 / total).sqrt();
    raw.into_iter().map(|v| v.into_iter().map(|z| z * s).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kron_is_associative(seed in any::<u64>(), a in 1usize..4, b in 1usize..4, c in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y, z) = (haar_unitary(a, &mut rng), haar_unitary(b, &mut rng), haar_unitary(c, &mut rng));
        let left = kron(&kron(&x, &y), &z);
        let right = kron(&x, &kron(&y, &z));
        prop_assert!(left.max_abs_diff(&right) <= 1e-12);
    }

    #[test]
    fn unitaries_preserve_norm(seed in any::<u64>(), d in 2usize..5, n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_state(&vec![d; n], &mut rng);
        let site = rng.random_range(0..n);
        let out = psi.apply_on(&[site], &haar_unitary(d, &mut rng)).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn partial_trace_of_product_is_factor(seed in any::<u64>(), a in 2usize..4, b in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_state(&[a], &mut rng);
        let y = random_state(&[b], &mut rng);
        let rho = x.tensor(&y).unwrap().density();
        let dims = DimensionSpec::new(vec![a, b]).unwrap();
        prop_assert!(partial_trace(&rho, &dims, &[0]).unwrap().max_abs_diff(&x.density()) <= 1e-12);
        prop_assert!(partial_trace(&rho, &dims, &[1]).unwrap().max_abs_diff(&y.density()) <= 1e-12);
    }

    #[test]
    fn decomposition_reassembles_output(seed in any::<u64>(), d in 2usize..5, d_anc in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atk = random_attack(d, d_anc, &mut rng).unwrap();
        let dec = decompose(&atk);
        for l in 0..d {
            let direct = atk.act_on(&emguard_core::states::basis_state(d, l).unwrap()).unwrap();
            let back = dec.reassemble(l);
            let err = direct.amplitudes().iter().zip(&back).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-9);
        }
        let weights = dec.row_weights();
        prop_assert!(weights.iter().all(|w| (w - 1.0).abs() <= 1e-9));
    }

    #[test]
    fn detection_and_leakage_stay_in_range(seed in any::<u64>(), d in 2usize..4, d_anc in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atk = random_attack(d, d_anc, &mut rng).unwrap();
        for p in decoy_case_probabilities(&atk).unwrap().values() {
            prop_assert!((0.0..=1.0).contains(p));
        }
        let leak = decoy_leakage(&atk).unwrap();
        prop_assert!(leak >= -1e-9 && leak <= (d.min(d_anc) as f64).log2() + 1e-9);
    }

    #[test]
    fn local_attacks_are_free(seed in any::<u64>(), d in 2usize..5, d_anc in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atk = local_ancilla_attack(d, &haar_unitary(d_anc, &mut rng)).unwrap();
        prop_assert!(decoy_average_detection(&atk).unwrap() <= 1e-12);
        prop_assert!(decoy_leakage(&atk).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn generator_parameters_round_trip(seed in any::<u64>(), d in 2usize..4, d_anc in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = d * d_anc;
        let params: Vec<f64> = (0..param_count(d, d_anc)).map(|_| rng.random_range(-3.0..3.0)).collect();
        let h = generator_from_params(n, &params).unwrap();
        prop_assert!(h.hermiticity_deviation() == 0.0);
        prop_assert_eq!(params_from_generator(&h), params.clone());
        let atk = parameterized_attack(d, d_anc, &params).unwrap();
        prop_assert!(atk.unitary().unitarity_deviation() <= 1e-10);
    }

    #[test]
    fn residual_vanishes_only_on_constant_vectors(seed in any::<u64>(), d in 2usize..8, constant in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = build_system(d, if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus }).unwrap();
        let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let x: Vec<C64> = if constant {
            vec![c; d]
        } else {
            (0..d).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
        };
        let unit: Vec<C64> = x.iter().map(|z| z / linalg::norm(&x)).collect();
        let r = residual_scalar(&sys, &unit).unwrap();
        let proportional = emguard_core::constraints::all_ones_deviation(&unit) <= 1e-8;
        prop_assert_eq!(r <= 1e-10, proportional);
        prop_assert_eq!(proportional, constant);
    }

    #[test]
    fn equal_ancilla_vectors_satisfy_every_row(seed in any::<u64>(), d in 2usize..6, d_anc in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<C64> = (0..d_anc).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let sys = build_system(d, Sign::Minus).unwrap();
        prop_assert!(residual(&sys, &vec![v; d]).unwrap() <= 1e-12);
    }

    #[test]
    fn ghz_reports_ignore_ancilla_basis(seed in any::<u64>(), d in 2usize..4, d_anc in 2usize..4, n in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = random_eps(d, d_anc, &mut rng);
        let w = haar_unitary(d_anc, &mut rng);
        let rotated: Vec<Vec<C64>> = eps.iter().map(|e| w.mul_vec(e)).collect();
        let a = ghz_joint_ancilla(d, n, &eps).unwrap();
        let b = ghz_joint_ancilla(d, n, &rotated).unwrap();
        for mode in CheckMode::ALL {
            let (pa, pb) = (ghz_check_detection(&a, mode).unwrap(), ghz_check_detection(&b, mode).unwrap());
            prop_assert!((pa - pb).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&pa));
        }
        prop_assert!((holevo_leakage(&a).unwrap() - holevo_leakage(&b).unwrap()).abs() <= 1e-9);
    }
}
