//! The two eavesdropping checks and what they reveal.
//!
//! * Decoy photons: single qudits prepared in `|k>` or `F|k>` and measured by
//!   the receiver in the announced preparation basis.
//! * GHZ correlations: an `n`-qudit GHZ carrier is measured either directly
//!   (all outcomes must agree) or after `F` on every carrier qudit (outcomes
//!   must sum to 0 mod `d`).
//!
//! Each check has an exact detection probability and a seeded Monte-Carlo
//! estimate; the leakage side is the Holevo quantity of Eve's ancilla.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{AttackUnitary, JointAncillaState};
use crate::error::{Error, Result};
use crate::linalg::{self, dagger, vn_entropy, DenseMatrix, C64};
use crate::par::{self, Execution};
use crate::states::{self, StateVector};

/// Which of the two mutually unbiased decoy families a decoy is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyBasis {
    Computational,
    Fourier,
}

impl DecoyBasis {
    pub const ALL: [DecoyBasis; 2] = [DecoyBasis::Computational, DecoyBasis::Fourier];

    pub fn name(self) -> &'static str {
        match self {
            DecoyBasis::Computational => "computational",
            DecoyBasis::Fourier => "fourier",
        }
    }
}

impl fmt::Display for DecoyBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The GHZ correlation test applied to a measured round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    /// Computational-basis outcomes must all be equal.
    AllEqual,
    /// After `F` on each carrier qudit, outcomes must sum to 0 mod `d`.
    SumModZero,
}

impl CheckMode {
    pub const ALL: [CheckMode; 2] = [CheckMode::AllEqual, CheckMode::SumModZero];

    pub fn name(self) -> &'static str {
        match self {
            CheckMode::AllEqual => "all_equal",
            CheckMode::SumModZero => "sum_mod_zero",
        }
    }
}

impl fmt::Display for CheckMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How each GHZ round picks its check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModePolicy {
    /// Fair coin per round.
    Random,
    Fixed(CheckMode),
}

/// Outcome of a batch of checks: exact probability, Monte-Carlo counts and
/// leakage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub p_exact: f64,
    pub trials: u64,
    pub detections: u64,
    /// Exact probability per decoy `basis/value` or per check mode.
    pub per_case: BTreeMap<String, f64>,
    pub leakage_bits: f64,
    pub seed: u64,
}

impl DetectionReport {
    pub fn frequency(&self) -> f64 {
        self.detections as f64 / self.trials as f64
    }

    /// One binomial standard deviation of the frequency around `p_exact`.
    pub fn sigma(&self) -> f64 {
        (self.p_exact * (1.0 - self.p_exact) / self.trials as f64).sqrt()
    }
}

pub fn decoy_state(d: usize, basis: DecoyBasis, k: usize) -> Result<StateVector> {
    match basis {
        DecoyBasis::Computational => states::basis_state(d, k),
        DecoyBasis::Fourier => states::fourier_state(d, k),
    }
}

fn case_key(basis: DecoyBasis, k: usize) -> String {
    format!("{basis}/{k}")
}

/// Probability that the receiver's measurement in the preparation basis
/// differs from `k`: `1 - ||(<decoy_k| ⊗ I) U (|decoy_k> ⊗ |ε>)||^2`.
pub fn decoy_detection_prob(atk: &AttackUnitary, basis: DecoyBasis, k: usize) -> Result<f64> {
    let d = atk.d_sys();
    if k >= d {
        return Err(Error::IndexOutOfRange { index: k, limit: d });
    }
    let decoy = decoy_state(d, basis, k)?;
    let out = atk.act_on(&decoy)?;
    let da = atk.d_anc();
    let amps = out.amplitudes();
    let kept: f64 = (0..da)
        .map(|a| {
            decoy
                .amplitudes()
                .iter()
                .enumerate()
                .map(|(s, z)| z.conj() * amps[s * da + a])
                .sum::<C64>()
                .norm_sqr()
        })
        .sum();
    Ok((1.0 - kept).clamp(0.0, 1.0))
}

/// Distribution of the receiver's outcome for decoy `k` of `basis`.
pub fn decoy_outcome_distribution(atk: &AttackUnitary, basis: DecoyBasis, k: usize) -> Result<Vec<f64>> {
    let d = atk.d_sys();
    let out = atk.act_on(&decoy_state(d, basis, k)?)?;
    let out = match basis {
        DecoyBasis::Computational => out,
        DecoyBasis::Fourier => out.apply_on(&[0], &dagger(&states::qft_matrix(d)?))?,
    };
    out.marginal(&[0])
}

/// Exact detection probability for every `(basis, value)` pair.
pub fn decoy_case_probabilities(atk: &AttackUnitary) -> Result<BTreeMap<String, f64>> {
    let mut cases = BTreeMap::new();
    for basis in DecoyBasis::ALL {
        for k in 0..atk.d_sys() {
            cases.insert(case_key(basis, k), decoy_detection_prob(atk, basis, k)?);
        }
    }
    Ok(cases)
}

/// Mean detection probability over a uniformly random basis and value.
pub fn decoy_average_detection(atk: &AttackUnitary) -> Result<f64> {
    let cases = decoy_case_probabilities(atk)?;
    Ok(cases.values().sum::<f64>() / cases.len() as f64)
}

/// Worst-case detection probability over all decoys.
pub fn decoy_max_detection(atk: &AttackUnitary) -> Result<f64> {
    Ok(decoy_case_probabilities(atk)?.values().copied().fold(0.0, f64::max))
}

/// Monte-Carlo decoy round with the default execution mode.
pub fn simulate_decoy_round(atk: &AttackUnitary, n_decoys: u64, seed: u64) -> Result<DetectionReport> {
    simulate_decoy_round_with(atk, n_decoys, seed, Execution::default())
}

/// Each decoy picks a basis and value uniformly, passes through the attack
/// and is measured in its announced basis; a mismatch counts as detection.
/// Decoy `i` uses RNG stream `(seed, i)`.
pub fn simulate_decoy_round_with(
    atk: &AttackUnitary,
    n_decoys: u64,
    seed: u64,
    exec: Execution,
) -> Result<DetectionReport> {
    if n_decoys == 0 {
        return Err(Error::InvalidArgument("need at least one decoy".into()));
    }
    let d = atk.d_sys();
    let mut dists = Vec::with_capacity(2 * d);
    for basis in DecoyBasis::ALL {
        for k in 0..d {
            dists.push(decoy_outcome_distribution(atk, basis, k)?);
        }
    }
    let detections = par::count_indexed(n_decoys as usize, exec, |i| {
        let mut rng = par::task_rng(seed, i as u64);
        let fourier = rng.random_bool(0.5);
        let k = rng.random_range(0..d);
        let dist = &dists[usize::from(fourier) * d + k];
        states::sample_index(dist, &mut rng) != k
    });
    let per_case = decoy_case_probabilities(atk)?;
    let p_exact = per_case.values().sum::<f64>() / per_case.len() as f64;
    Ok(DetectionReport {
        p_exact,
        trials: n_decoys,
        detections: detections as u64,
        per_case,
        leakage_bits: decoy_leakage(atk)?,
        seed,
    })
}

fn digit_sum_mod(dims: &linalg::DimensionSpec, index: usize, d: usize) -> usize {
    dims.digits(index).iter().sum::<usize>() % d
}

fn is_constant(digits: &[usize]) -> bool {
    digits.windows(2).all(|w| w[0] == w[1])
}

/// Carrier outcome distribution seen by `mode`, and which outcomes fail it.
fn check_outcomes(state: &JointAncillaState, mode: CheckMode) -> Result<(Vec<f64>, Vec<bool>)> {
    let (d, n) = (state.d(), state.n());
    let carriers: Vec<usize> = (0..n).collect();
    let psi = match mode {
        CheckMode::AllEqual => state.state().clone(),
        CheckMode::SumModZero => {
            let f = states::qft_matrix(d)?;
            let mut psi = state.state().clone();
            for &site in &carriers {
                psi = psi.apply_on(&[site], &f)?;
            }
            psi
        }
    };
    let probs = psi.marginal(&carriers)?;
    let dims = linalg::DimensionSpec::uniform(d, n)?;
    let fails = (0..probs.len())
        .map(|s| match mode {
            CheckMode::AllEqual => !is_constant(&dims.digits(s)),
            CheckMode::SumModZero => digit_sum_mod(&dims, s, d) != 0,
        })
        .collect();
    Ok((probs, fails))
}

/// Probability that one round of `mode` flags the state.
pub fn ghz_check_detection(state: &JointAncillaState, mode: CheckMode) -> Result<f64> {
    let (probs, fails) = check_outcomes(state, mode)?;
    let p: f64 = probs.iter().zip(&fails).filter(|(_, &f)| f).map(|(p, _)| p).sum();
    Ok(p.clamp(0.0, 1.0))
}

pub fn simulate_ghz_round(
    state: &JointAncillaState,
    n_rounds: u64,
    policy: ModePolicy,
    seed: u64,
) -> Result<DetectionReport> {
    simulate_ghz_round_with(state, n_rounds, policy, seed, Execution::default())
}

/// Round `i` (RNG stream `(seed, i)`) picks its mode per `policy`, samples
/// the carrier measurement and tests the mode's condition.
pub fn simulate_ghz_round_with(
    state: &JointAncillaState,
    n_rounds: u64,
    policy: ModePolicy,
    seed: u64,
    exec: Execution,
) -> Result<DetectionReport> {
    if n_rounds == 0 {
        return Err(Error::InvalidArgument("need at least one round".into()));
    }
    let all_equal = check_outcomes(state, CheckMode::AllEqual)?;
    let sum_mod = check_outcomes(state, CheckMode::SumModZero)?;
    let detections = par::count_indexed(n_rounds as usize, exec, |i| {
        let mut rng = par::task_rng(seed, i as u64);
        let mode = match policy {
            ModePolicy::Random if rng.random_bool(0.5) => CheckMode::SumModZero,
            ModePolicy::Random => CheckMode::AllEqual,
            ModePolicy::Fixed(m) => m,
        };
        let (probs, fails) = match mode {
            CheckMode::AllEqual => &all_equal,
            CheckMode::SumModZero => &sum_mod,
        };
        fails[states::sample_index(probs, &mut rng)]
    });
    let mut per_case = BTreeMap::new();
    for mode in CheckMode::ALL {
        per_case.insert(mode.name().to_string(), ghz_check_detection(state, mode)?);
    }
    let p_exact = match policy {
        ModePolicy::Random => per_case.values().sum::<f64>() / per_case.len() as f64,
        ModePolicy::Fixed(m) => per_case[m.name()],
    };
    Ok(DetectionReport {
        p_exact,
        trials: n_rounds,
        detections: detections as u64,
        per_case,
        leakage_bits: holevo_leakage(state)?,
        seed,
    })
}

/// `χ = S(Σ p_i ρ_i) - Σ p_i S(ρ_i)` in bits for a mixed-state ensemble.
pub fn holevo_quantity(ensemble: &[(f64, DenseMatrix)]) -> Result<f64> {
    let (first_p, first) = ensemble
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    let mut avg = first.scale(C64::new(*first_p, 0.0));
    let mut conditional = first_p * vn_entropy(first)?;
    for (p, rho) in &ensemble[1..] {
        avg = avg.add(&rho.scale(C64::new(*p, 0.0)));
        conditional += p * vn_entropy(rho)?;
    }
    Ok(vn_entropy(&avg)? - conditional)
}

/// Holevo quantity of an ensemble of pure states given as unnormalized
/// vectors: branch weights are `||v||^2 / Σ ||v||^2` and the conditional
/// entropies vanish. Zero vectors are skipped.
pub fn holevo_pure_branches(branches: &[Vec<C64>]) -> Result<f64> {
    let total: f64 = branches.iter().map(|v| linalg::norm(v).powi(2)).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("all ancilla branches are zero".into()));
    }
    let dim = branches[0].len();
    let mut avg = DenseMatrix::zeros(dim, dim);
    for v in branches.iter().filter(|v| linalg::norm(v) > 0.0) {
        avg = avg.add(&DenseMatrix::outer(v));
    }
    vn_entropy(&avg.scale(C64::new(1.0 / total, 0.0)))
}

/// Eve's information about the carrier's computational value: the Holevo
/// quantity of her ancilla conditioned on the measured carrier string
/// (for a state built from `ε_j` this is the ensemble `{||ε_j||²/d, ε_j}`).
pub fn holevo_leakage(state: &JointAncillaState) -> Result<f64> {
    let strings = state.state().len() / state.d_anc();
    let branches = (0..strings).map(|s| state.conditional(s)).collect::<Result<Vec<_>>>()?;
    holevo_pure_branches(&branches)
}

/// Holevo quantity of `{1/d, Tr_sys U(|l><l| ⊗ |ε><ε|)U†}`: what the ancilla
/// reveals about a computational-basis message qudit.
pub fn decoy_leakage(atk: &AttackUnitary) -> Result<f64> {
    let d = atk.d_sys();
    let p = 1.0 / d as f64;
    let ensemble = (0..d)
        .map(|l| {
            let out = atk.act_on(&states::basis_state(d, l)?)?;
            Ok((p, out.reduced_density(&[1])?))
        })
        .collect::<Result<Vec<_>>>()?;
    holevo_quantity(&ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{
        controlled_shift_attack, ghz_joint_ancilla, identity_attack, local_ancilla_attack, random_attack,
    };
    use crate::linalg::{haar_unitary, ONE, ZERO};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(d: usize, k: usize) -> Vec<C64> {
        let mut v = vec![ZERO; d];
        v[k] = ONE;
        v
    }

    #[test]
    fn identity_is_never_detected() {
        let atk = identity_attack(3, 2).unwrap();
        for basis in DecoyBasis::ALL {
            for k in 0..3 {
                assert!(decoy_detection_prob(&atk, basis, k).unwrap() < 1e-15);
            }
        }
        assert!(decoy_average_detection(&atk).unwrap() < 1e-15);
        assert!(decoy_leakage(&atk).unwrap().abs() < 1e-12);
        assert!(decoy_detection_prob(&atk, DecoyBasis::Fourier, 3).is_err());
    }

    #[test]
    fn controlled_shift_detection_values() {
        let atk = controlled_shift_attack(2).unwrap();
        for k in 0..2 {
            assert!(decoy_detection_prob(&atk, DecoyBasis::Computational, k).unwrap().abs() < 1e-12);
            let p = decoy_detection_prob(&atk, DecoyBasis::Fourier, k).unwrap();
            assert!((p - 0.5).abs() < 1e-12);
        }
        assert!((decoy_average_detection(&atk).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fourier_detection_matches_statevector_oracle() {
        // CNOT on |+>|0> = (|00>+|11>)/√2; project the system on <+|:
        // (|0>+|1>)/2 on the ancilla, norm^2 = 1/2, so detection is 1/2.
        let atk = controlled_shift_attack(2).unwrap();
        let out = atk.act_on(&states::fourier_state(2, 0).unwrap()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = out.amplitudes();
        let v0 = (a[0] + a[2]) * s;
        let v1 = (a[1] + a[3]) * s;
        let p = 1.0 - v0.norm_sqr() - v1.norm_sqr();
        assert!((p - decoy_detection_prob(&atk, DecoyBasis::Fourier, 0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn outcome_distribution_agrees_with_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let atk = random_attack(3, 2, &mut rng).unwrap();
        for basis in DecoyBasis::ALL {
            for k in 0..3 {
                let dist = decoy_outcome_distribution(&atk, basis, k).unwrap();
                assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let p = decoy_detection_prob(&atk, basis, k).unwrap();
                assert!((1.0 - dist[k] - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn local_attacks_leave_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for d in 2..=4 {
            let atk = local_ancilla_attack(d, &haar_unitary(3, &mut rng)).unwrap();
            assert!(decoy_average_detection(&atk).unwrap() <= 1e-12);
            assert!(decoy_leakage(&atk).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn controlled_shift_leaks_log_d() {
        for d in 2..=5 {
            let atk = controlled_shift_attack(d).unwrap();
            assert!((decoy_leakage(&atk).unwrap() - (d as f64).log2()).abs() < 1e-9);
        }
    }

    #[test]
    fn decoy_monte_carlo() {
        let id = identity_attack(2, 2).unwrap();
        let r = simulate_decoy_round(&id, 10_000, 1).unwrap();
        assert_eq!(r.detections, 0);
        assert!(r.p_exact < 1e-15);

        let cs = controlled_shift_attack(2).unwrap();
        let r = simulate_decoy_round(&cs, 10_000, 2).unwrap();
        assert!((r.p_exact - 0.25).abs() < 1e-12);
        let sigma = (0.25f64 * 0.75 / 1e4).sqrt();
        assert!((r.frequency() - 0.25).abs() <= 3.0 * sigma, "freq {}", r.frequency());
        assert_eq!(r, simulate_decoy_round(&cs, 10_000, 2).unwrap());
        assert_eq!(r, simulate_decoy_round_with(&cs, 10_000, 2, Execution::Sequential).unwrap());
        assert!(simulate_decoy_round(&cs, 0, 2).is_err());
    }

    #[test]
    fn ghz_check_cases() {
        let product = ghz_joint_ancilla(3, 3, &vec![unit(2, 1); 3]).unwrap();
        for mode in CheckMode::ALL {
            assert!(ghz_check_detection(&product, mode).unwrap().abs() < 1e-12);
        }
        assert!(holevo_leakage(&product).unwrap().abs() < 1e-12);

        let probe = ghz_joint_ancilla(2, 2, &[unit(2, 0), unit(2, 1)]).unwrap();
        assert!(ghz_check_detection(&probe, CheckMode::AllEqual).unwrap().abs() < 1e-12);
        let p = ghz_check_detection(&probe, CheckMode::SumModZero).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((holevo_leakage(&probe).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sum_mod_detection_matches_hand_expansion() {
        // (F⊗F)(|00>|0> + |11>|1>)/√2 = (1/(2√2)) Σ_{r1 r2} |r1 r2> ⊗ (|0> + (-1)^{r1+r2}|1>)
        // strings 01 and 10 each carry ancilla (|0> - |1>)/(2√2): weight 1/4 each.
        let probe = ghz_joint_ancilla(2, 2, &[unit(2, 0), unit(2, 1)]).unwrap();
        let f = states::qft_matrix(2).unwrap();
        let psi = probe.state().apply_on(&[0], &f).unwrap().apply_on(&[1], &f).unwrap();
        let w01: f64 = psi.amplitudes()[2..4].iter().map(|z| z.norm_sqr()).sum();
        let w10: f64 = psi.amplitudes()[4..6].iter().map(|z| z.norm_sqr()).sum();
        assert!((w01 - 0.25).abs() < 1e-12 && (w10 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_probe_leaks_log_d() {
        for d in 2..=5 {
            let eps: Vec<_> = (0..d).map(|j| unit(d, j)).collect();
            let st = ghz_joint_ancilla(d, 2, &eps).unwrap();
            assert!((holevo_leakage(&st).unwrap() - (d as f64).log2()).abs() < 1e-9);
        }
    }

    #[test]
    fn reports_are_gauge_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let raw: Vec<Vec<C64>> = (0..3)
            .map(|_| (0..2).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .collect();
        let total: f64 = raw.iter().map(|v| linalg::norm(v).powi(2)).sum();
        let scale = (3.0 / total).sqrt();
        let eps: Vec<Vec<C64>> = raw.iter().map(|v| v.iter().map(|z| z * scale).collect()).collect();
        let phase = C64::from_polar(1.0, 1.234);
        let rotated: Vec<Vec<C64>> = eps.iter().map(|v| v.iter().map(|z| z * phase).collect()).collect();
        let a = ghz_joint_ancilla(3, 2, &eps).unwrap();
        let b = ghz_joint_ancilla(3, 2, &rotated).unwrap();
        for mode in CheckMode::ALL {
            let pa = ghz_check_detection(&a, mode).unwrap();
            let pb = ghz_check_detection(&b, mode).unwrap();
            assert!((pa - pb).abs() < 1e-12);
        }
        assert!((holevo_leakage(&a).unwrap() - holevo_leakage(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ghz_monte_carlo() {
        let product = ghz_joint_ancilla(2, 2, &[unit(2, 0), unit(2, 0)]).unwrap();
        let r = simulate_ghz_round(&product, 5_000, ModePolicy::Random, 3).unwrap();
        assert_eq!(r.detections, 0);

        let probe = ghz_joint_ancilla(2, 2, &[unit(2, 0), unit(2, 1)]).unwrap();
        let r = simulate_ghz_round(&probe, 10_000, ModePolicy::Random, 4).unwrap();
        assert!((r.p_exact - 0.25).abs() < 1e-12);
        let sigma = (0.25f64 * 0.75 / 1e4).sqrt();
        assert!((r.frequency() - 0.25).abs() <= 3.0 * sigma);
        assert_eq!(r, simulate_ghz_round(&probe, 10_000, ModePolicy::Random, 4).unwrap());

        let fixed = simulate_ghz_round(&probe, 100, ModePolicy::Fixed(CheckMode::AllEqual), 4).unwrap();
        assert_eq!(fixed.detections, 0);
        assert_eq!(fixed.p_exact, fixed.per_case["all_equal"]);
    }

    #[test]
    fn report_json_field_names() {
        let cs = controlled_shift_attack(2).unwrap();
        let r = simulate_decoy_round(&cs, 10, 0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["detections", "leakage_bits", "p_exact", "per_case", "seed", "trials"]);
        assert!(v["per_case"].get("fourier/1").is_some());
    }

    #[test]
    fn holevo_rejects_empty() {
        assert!(holevo_pure_branches(&[vec![ZERO; 2], vec![ZERO; 2]]).is_err());
        assert!(holevo_quantity(&[]).is_err());
    }
}
