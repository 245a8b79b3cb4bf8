//! Search for the most informative attack under a detection budget.
//!
//! Attacks are `exp(iH)` for a Hermitian generator `H` with `(d·d_anc)²` real
//! parameters. Each restart runs Nelder–Mead on
//! `leakage - μ·max(0, detection - cap)²` from a random start, and remembers
//! the best evaluation that actually met the cap. The curve produced here is
//! an empirical probe of the detection/information tradeoff, not a bound.

use serde::{Deserialize, Serialize};

use crate::attack::{param_count, parameterized_attack};
use crate::eavesdrop::{decoy_average_detection, decoy_leakage};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use rand::Rng;
use std::f64::consts::PI;

/// Slack allowed when deciding that an evaluation meets its cap.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Caps swept when none are given.
pub const DEFAULT_CAPS: [f64; 5] = [1.0, 0.1, 0.01, 1e-3, 1e-4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub d: usize,
    pub d_anc: usize,
    pub detection_cap: f64,
    pub penalty_weight: f64,
    pub restarts: usize,
    pub max_evals: usize,
    pub simplex_scale: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            d: 2,
            d_anc: 2,
            detection_cap: 1.0,
            penalty_weight: 1e3,
            restarts: 8,
            max_evals: 2000,
            simplex_scale: 0.5,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.d < 2 || self.d_anc < 2 {
            return bad(format!("levels must be at least 2, got d={} d_anc={}", self.d, self.d_anc));
        }
        if self.d * self.d_anc > 16 {
            return bad(format!("search space d*d_anc={} exceeds 16", self.d * self.d_anc));
        }
        if !(0.0..=1.0).contains(&self.detection_cap) {
            return bad(format!("detection cap {} outside [0, 1]", self.detection_cap));
        }
        if !(self.penalty_weight > 0.0 && self.penalty_weight.is_finite()) {
            return bad(format!("penalty weight must be positive, got {}", self.penalty_weight));
        }
        if self.restarts == 0 || self.max_evals == 0 {
            return bad("restarts and max_evals must be at least 1".into());
        }
        if !(self.simplex_scale > 0.0 && self.simplex_scale.is_finite()) {
            return bad(format!("simplex scale must be positive, got {}", self.simplex_scale));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub detection_cap: f64,
    pub achieved_detection: f64,
    pub achieved_leakage_bits: f64,
    pub objective: f64,
    /// Whether `achieved_detection <= detection_cap + 1e-6`.
    pub feasible: bool,
    pub params: Vec<f64>,
    pub evals_used: usize,
}

/// Leakage, average decoy detection and penalized objective at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub leakage: f64,
    pub detection: f64,
    pub objective: f64,
}

pub fn evaluate(params: &[f64], cfg: &OptimizerConfig) -> Result<Evaluation> {
    let atk = parameterized_attack(cfg.d, cfg.d_anc, params)?;
    let leakage = decoy_leakage(&atk)?;
    let detection = decoy_average_detection(&atk)?;
    let excess = (detection - cfg.detection_cap).max(0.0);
    Ok(Evaluation { leakage, detection, objective: leakage - cfg.penalty_weight * excess * excess })
}

pub fn objective(params: &[f64], cfg: &OptimizerConfig) -> Result<f64> {
    Ok(evaluate(params, cfg)?.objective)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
}

/// Minimises `f` from an axis-aligned simplex of edge `scale` around `x0`.
/// Stops after `max_evals` evaluations or once the simplex values agree to
/// within `ftol`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: f64,
    max_evals: usize,
    ftol: f64,
) -> NelderMeadResult {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        if evals >= max_evals {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += scale;
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
    };

    while simplex.len() == n + 1 && evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let xr = blend(&centroid, &simplex[n].0, -REFLECT);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = blend(&centroid, &simplex[n].0, -EXPAND);
            let fe = if evals < max_evals { eval(&xe, &mut evals) } else { f64::INFINITY };
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let outside = fr < worst;
            let xc = if outside {
                blend(&centroid, &xr, CONTRACT)
            } else {
                blend(&centroid, &simplex[n].0, CONTRACT)
            };
            if evals >= max_evals {
                break;
            }
            let fc = eval(&xc, &mut evals);
            if fc < fr.min(worst) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    if evals >= max_evals {
                        break;
                    }
                    let xs = blend(&x_best, &vertex.0, SHRINK);
                    let fs = eval(&xs, &mut evals);
                    *vertex = (xs, fs);
                }
            }
        }
    }
    let (x, fx) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex holds the start point");
    NelderMeadResult { x, fx, evals }
}

#[derive(Clone, Debug)]
struct Candidate {
    params: Vec<f64>,
    eval: Evaluation,
    feasible: bool,
}

impl Candidate {
    /// Feasible beats infeasible, then higher objective.
    fn beats(&self, other: &Candidate) -> bool {
        match (self.feasible, other.feasible) {
            (true, false) => true,
            (false, true) => false,
            _ => self.eval.objective > other.eval.objective,
        }
    }
}

fn run_restart(cfg: &OptimizerConfig, index: usize) -> (Option<Candidate>, usize) {
    let n = param_count(cfg.d, cfg.d_anc);
    let mut rng = par::task_rng(cfg.seed, index as u64);
    let start: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
    let mut best: Option<Candidate> = None;
    let result = nelder_mead(
        |x| {
            let Ok(eval) = evaluate(x, cfg) else { return f64::INFINITY };
            let cand = Candidate {
                params: x.to_vec(),
                eval,
                feasible: eval.detection <= cfg.detection_cap + FEASIBILITY_TOL,
            };
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
            -eval.objective
        },
        &start,
        cfg.simplex_scale,
        cfg.max_evals,
        1e-14,
    );
    (best, result.evals)
}

pub fn optimize_attack(cfg: &OptimizerConfig) -> Result<TradeoffPoint> {
    optimize_attack_with(cfg, Execution::default())
}

/// Runs the restarts (stream `(seed, r)` for restart `r`) and keeps the best
/// by (feasible first, objective descending, restart index ascending). The
/// identity attack is always a feasible fallback with zero leakage.
pub fn optimize_attack_with(cfg: &OptimizerConfig, exec: Execution) -> Result<TradeoffPoint> {
    cfg.validate()?;
    let runs = par::map_indexed(cfg.restarts, exec, |r| run_restart(cfg, r));
    let evals_used = runs.iter().map(|(_, e)| e).sum::<usize>() + 1;
    let zeros = vec![0.0; param_count(cfg.d, cfg.d_anc)];
    let identity = Candidate { eval: evaluate(&zeros, cfg)?, params: zeros, feasible: true };
    let mut best: Option<Candidate> = None;
    for cand in runs.into_iter().filter_map(|(c, _)| c).chain(std::iter::once(identity)) {
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    }
    let best = best.expect("identity fallback is always present");
    Ok(TradeoffPoint {
        detection_cap: cfg.detection_cap,
        achieved_detection: best.eval.detection,
        achieved_leakage_bits: best.eval.leakage,
        objective: best.eval.objective,
        feasible: best.feasible,
        params: best.params,
        evals_used,
    })
}

pub fn tradeoff_curve(cfg: &OptimizerConfig, caps: &[f64]) -> Result<Vec<TradeoffPoint>> {
    tradeoff_curve_with(cfg, caps, Execution::default())
}

/// One optimisation per cap, then a running maximum from the smallest cap
/// upwards: a point found under a tighter cap also meets every looser one,
/// so it replaces any worse point found for a larger cap.
pub fn tradeoff_curve_with(cfg: &OptimizerConfig, caps: &[f64], exec: Execution) -> Result<Vec<TradeoffPoint>> {
    if caps.is_empty() {
        return Err(Error::InvalidArgument("need at least one detection cap".into()));
    }
    if let Some(c) = caps.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::InvalidArgument(format!("detection cap {c} outside [0, 1]")));
    }
    if caps.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("detection caps must be in descending order".into()));
    }
    let mut points = caps
        .iter()
        .map(|&cap| optimize_attack_with(&OptimizerConfig { detection_cap: cap, ..cfg.clone() }, exec))
        .collect::<Result<Vec<_>>>()?;
    let mut carried: Option<TradeoffPoint> = None;
    for point in points.iter_mut().rev() {
        match &carried {
            Some(prev) if prev.feasible && prev.achieved_leakage_bits > point.achieved_leakage_bits => {
                let evals = point.evals_used;
                *point = TradeoffPoint { detection_cap: point.detection_cap, evals_used: evals, ..prev.clone() };
            }
            _ => {}
        }
        if point.feasible {
            carried = Some(point.clone());
        }
    }
    Ok(points)
}
