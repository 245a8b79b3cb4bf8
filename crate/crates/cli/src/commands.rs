use std::fs;
use std::path::Path;

use emguard_core::attack::{
    controlled_shift_attack, decompose, ghz_joint_ancilla, identity_attack, is_undetectable, param_count,
    parameterized_attack, random_attack, AttackFile, AttackUnitary, UNDETECTABLE_TOL,
};
use emguard_core::constraints;
use emguard_core::eavesdrop::{self, CheckMode, DetectionReport, ModePolicy};
use emguard_core::optimizer::{self, OptimizerConfig, TradeoffPoint, DEFAULT_CAPS};
use emguard_core::par;
use emguard_core::{Sign, C64};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    resolve, usage, AttackSource, Common, ConstraintsArgs, DecoyArgs, EpsSource, Format, GhzArgs, ModeArg,
    OptimizeArgs, SignArg,
};
use crate::error::CliError;
use crate::output::{emit, fmt_f64, object_to_csv, to_compact, to_json};

const DEFAULT_TRIALS: u64 = 10_000;

/// RNG stream for sampling a random attack, kept apart from the per-trial
/// streams `0..trials`.
const ATTACK_STREAM: u64 = u64::MAX;

fn level(name: &str, value: Option<usize>, default: usize) -> Result<usize, CliError> {
    let v = value.unwrap_or(default);
    if v < 2 {
        return Err(usage(format!("--{name} must be at least 2, got {v}")));
    }
    Ok(v)
}

fn trials(value: Option<u64>) -> Result<u64, CliError> {
    match value.unwrap_or(DEFAULT_TRIALS) {
        0 => Err(usage("--trials must be at least 1")),
        t => Ok(t),
    }
}

fn write_report(common: &Common, value: &Value) -> Result<(), CliError> {
    let text = match common.format() {
        Format::Json => to_json(value),
        Format::Csv => object_to_csv(value),
    };
    emit(&text, common.out.as_deref())
}

#[derive(Serialize)]
struct McReport<'a> {
    command: &'static str,
    config: Value,
    #[serde(flatten)]
    report: &'a DetectionReport,
    frequency: f64,
    sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    predicate: Option<Value>,
}

fn load_attack(path: &Path) -> Result<AttackUnitary, CliError> {
    AttackUnitary::load(path).map_err(|e| match e {
        emguard_core::Error::Io { .. } => CliError::Io(e.to_string()),
        emguard_core::Error::Json(_) => CliError::Io(format!("{}: {e}", path.display())),
        other => CliError::Usage(format!("{}: {other}", path.display())),
    })
}

fn build_attack(a: &DecoyArgs, seed: u64) -> Result<(AttackUnitary, AttackSource), CliError> {
    let source = a.attack.unwrap_or(if a.attack_file.is_some() {
        AttackSource::File
    } else if a.params.is_some() {
        AttackSource::Params
    } else {
        AttackSource::Identity
    });
    if a.attack_file.is_some() && source != AttackSource::File {
        return Err(usage("--attack-file is only used with --attack file"));
    }
    if a.params.is_some() && source != AttackSource::Params {
        return Err(usage("--params is only used with --attack params"));
    }
    let d = level("d", a.d, 2)?;
    let atk = match source {
        AttackSource::Identity => identity_attack(d, level("danc", a.danc, 2)?)?,
        AttackSource::ControlledShift => {
            if a.danc.is_some_and(|x| x != d) {
                return Err(usage("controlled-shift uses an ancilla of level d; drop --danc or set it to d"));
            }
            controlled_shift_attack(d)?
        }
        AttackSource::Haar => {
            let mut rng = par::task_rng(seed, ATTACK_STREAM);
            random_attack(d, level("danc", a.danc, 2)?, &mut rng)?
        }
        AttackSource::File => {
            let path = a.attack_file.as_ref().ok_or_else(|| usage("--attack file needs --attack-file PATH"))?;
            let atk = load_attack(path)?;
            if a.d.is_some_and(|x| x != atk.d_sys()) || a.danc.is_some_and(|x| x != atk.d_anc()) {
                return Err(usage(format!(
                    "{} holds a d={} d_anc={} attack, which contradicts --d/--danc",
                    path.display(),
                    atk.d_sys(),
                    atk.d_anc()
                )));
            }
            atk
        }
        AttackSource::Params => {
            let params = a.params.as_ref().ok_or_else(|| usage("--attack params needs --params"))?;
            let d_anc = level("danc", a.danc, 2)?;
            if params.len() != param_count(d, d_anc) {
                return Err(usage(format!(
                    "--params needs {} values for d={d} d_anc={d_anc}, got {}",
                    param_count(d, d_anc),
                    params.len()
                )));
            }
            parameterized_attack(d, d_anc, params)?
        }
    };
    Ok((atk, source))
}

pub fn decoy(flags: &DecoyArgs) -> Result<(), CliError> {
    let a = resolve(flags, flags.common.config.as_ref())?;
    let seed = a.common.seed();
    let trials = trials(a.trials)?;
    let tol = a.tol.unwrap_or(UNDETECTABLE_TOL);
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(usage(format!("--tol must be a non-negative number, got {tol}")));
    }
    let (atk, source) = build_attack(&a, seed)?;
    if let Some(path) = &a.save_attack {
        fs::write(path, to_json(&AttackFile::from(&atk)))
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    let report = par::with_threads(a.common.threads, || eavesdrop::simulate_decoy_round(&atk, trials, seed))?;
    let dec = decompose(&atk);
    let mut config = json!({
        "d": atk.d_sys(),
        "d_anc": atk.d_anc(),
        "attack": source,
        "trials": trials,
        "seed": seed,
        "tol": tol,
    });
    if let Some(path) = &a.attack_file {
        config["attack_file"] = json!(path);
    }
    if let Some(params) = &a.params {
        config["params"] = json!(params);
    }
    let out = McReport {
        command: "decoy",
        config,
        frequency: report.frequency(),
        sigma: report.sigma(),
        report: &report,
        predicate: Some(json!({
            "tol": tol,
            "undetectable": is_undetectable(&dec, tol),
            "max_off_diagonal": dec.max_off_diagonal(),
            "max_diagonal_spread": dec.max_diagonal_spread(),
            "max_detection": eavesdrop::decoy_max_detection(&atk)?,
        })),
    };
    write_report(&a.common, &serde_json::to_value(&out).expect("report serializes"))
}

fn read_eps(path: &Path) -> Result<Vec<Vec<C64>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let raw: Vec<Vec<[f64; 2]>> =
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(raw.into_iter().map(|v| v.into_iter().map(|[re, im]| C64::new(re, im)).collect()).collect())
}

fn unit(dim: usize, k: usize) -> Vec<C64> {
    (0..dim).map(|i| C64::new(if i == k { 1.0 } else { 0.0 }, 0.0)).collect()
}

pub fn ghz(flags: &GhzArgs) -> Result<(), CliError> {
    let a = resolve(flags, flags.common.config.as_ref())?;
    let seed = a.common.seed();
    let trials = trials(a.trials)?;
    let d = level("d", a.d, 2)?;
    let n = level("n", a.n, 2)?;
    let source = a.eps.unwrap_or(if a.eps_file.is_some() { EpsSource::File } else { EpsSource::Equal });
    if a.eps_file.is_some() && source != EpsSource::File {
        return Err(usage("--eps-file is only used with --eps file"));
    }
    let eps = match source {
        EpsSource::Equal => vec![unit(level("danc", a.danc, d)?, 0); d],
        EpsSource::Orthogonal => {
            let d_anc = level("danc", a.danc, d)?;
            if d_anc < d {
                return Err(usage(format!("orthogonal ancillas need --danc >= d, got {d_anc} < {d}")));
            }
            (0..d).map(|j| unit(d_anc, j)).collect()
        }
        EpsSource::File => {
            let path = a.eps_file.as_ref().ok_or_else(|| usage("--eps file needs --eps-file PATH"))?;
            if a.danc.is_some() {
                return Err(usage("--danc is taken from the eps file"));
            }
            read_eps(path)?
        }
    };
    if eps.is_empty() || eps[0].is_empty() {
        return Err(usage("ancilla vectors must be non-empty"));
    }
    let state = ghz_joint_ancilla(d, n, &eps)?;
    let mode = a.mode.unwrap_or(ModeArg::Random);
    let policy = match mode {
        ModeArg::AllEqual => ModePolicy::Fixed(CheckMode::AllEqual),
        ModeArg::SumMod => ModePolicy::Fixed(CheckMode::SumModZero),
        ModeArg::Random => ModePolicy::Random,
    };
    let report = par::with_threads(a.common.threads, || eavesdrop::simulate_ghz_round(&state, trials, policy, seed))?;
    let mut config = json!({
        "d": d,
        "n": n,
        "d_anc": state.d_anc(),
        "eps": source,
        "mode": mode,
        "trials": trials,
        "seed": seed,
    });
    if let Some(path) = &a.eps_file {
        config["eps_file"] = json!(path);
    }
    let out = McReport {
        command: "ghz",
        config,
        frequency: report.frequency(),
        sigma: report.sigma(),
        report: &report,
        predicate: None,
    };
    write_report(&a.common, &serde_json::to_value(&out).expect("report serializes"))
}

pub fn constraints(flags: &ConstraintsArgs) -> Result<(), CliError> {
    let a = resolve(flags, flags.common.config.as_ref())?;
    let d = a.d.unwrap_or(3);
    if !(2..=16).contains(&d) {
        return Err(usage(format!("--d must be in 2..=16, got {d}")));
    }
    let sign = match a.sign.unwrap_or(SignArg::Neg) {
        SignArg::Pos => Sign::Plus,
        SignArg::Neg => Sign::Minus,
    };
    let report = constraints::analyze(d, sign)?;
    write_report(&a.common, &serde_json::to_value(&report).expect("report serializes"))
}

fn curve_csv(config: &Value, seed: u64, points: &[TradeoffPoint]) -> String {
    let mut out = String::from("# empirical leakage-vs-detection probe from random-restart search; not a proven bound\n");
    out.push_str(&format!("# config: {}\n", to_compact(config)));
    out.push_str(&format!("# seed: {seed}\n"));
    out.push_str("cap,achieved_detection,leakage_bits,evals\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p.detection_cap),
            fmt_f64(p.achieved_detection),
            fmt_f64(p.achieved_leakage_bits),
            p.evals_used
        ));
    }
    out
}

pub fn optimize(flags: &OptimizeArgs) -> Result<(), CliError> {
    let a = resolve(flags, flags.common.config.as_ref())?;
    let defaults = OptimizerConfig::default();
    let cfg = OptimizerConfig {
        d: level("d", a.d, defaults.d)?,
        d_anc: level("danc", a.danc, defaults.d_anc)?,
        detection_cap: defaults.detection_cap,
        penalty_weight: a.penalty.unwrap_or(defaults.penalty_weight),
        restarts: a.restarts.unwrap_or(defaults.restarts),
        max_evals: a.max_evals.unwrap_or(defaults.max_evals),
        simplex_scale: a.simplex_scale.unwrap_or(defaults.simplex_scale),
        seed: a.common.seed(),
    };
    cfg.validate()?;
    let caps = a.caps.clone().unwrap_or_else(|| DEFAULT_CAPS.to_vec());
    let points = par::with_threads(a.common.threads, || optimizer::tradeoff_curve(&cfg, &caps))?;
    let config = json!({
        "d": cfg.d,
        "d_anc": cfg.d_anc,
        "caps": caps,
        "penalty_weight": cfg.penalty_weight,
        "restarts": cfg.restarts,
        "max_evals": cfg.max_evals,
        "simplex_scale": cfg.simplex_scale,
        "seed": cfg.seed,
    });
    let text = match a.common.format() {
        Format::Json => to_json(&json!({
            "command": "optimize",
            "note": "empirical leakage-vs-detection probe from random-restart search; not a proven bound",
            "config": config,
            "points": points,
        })),
        Format::Csv => curve_csv(&config, cfg.seed, &points),
    };
    emit(&text, a.common.out.as_deref())
}
