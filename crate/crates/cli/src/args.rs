//! Flag definitions and config-file layering.
//!
//! Every subcommand's flags are optional so that a value can come from, in
//! order of precedence, the command line, a JSON `--config` file, or the
//! built-in default.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "emguard", version, about = "Simulate and analyse entanglement-measurement attacks on qudit eavesdropping checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the built-in invariant checks across all modules.
    Verify(VerifyArgs),
    /// Exact and Monte-Carlo detection of an attack by decoy qudits.
    Decoy(DecoyArgs),
    /// Exact and Monte-Carlo detection by GHZ correlation checks.
    Ghz(GhzArgs),
    /// Rank, determinant and kernel of the roots-of-unity constraint system.
    Constraints(ConstraintsArgs),
    /// Leakage-versus-detection tradeoff curve from the attack optimizer.
    Optimize(OptimizeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct Common {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Upper bound on worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// JSON file with default values for any of this command's flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Common {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Json)
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Largest level swept by the level-dependent checks (2..=16).
    #[arg(long)]
    pub d_max: Option<usize>,
    #[arg(long, hide = true)]
    #[serde(skip)]
    pub corrupt_qft: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackSource {
    Identity,
    ControlledShift,
    Haar,
    File,
    Params,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct DecoyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub d: Option<usize>,
    /// Ancilla level (controlled-shift always uses d).
    #[arg(long)]
    pub danc: Option<usize>,
    #[arg(long, value_enum)]
    pub attack: Option<AttackSource>,
    /// Attack JSON for `--attack file`.
    #[arg(long)]
    pub attack_file: Option<PathBuf>,
    /// Comma-separated generator parameters for `--attack params`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Tolerance of the undetectability predicate.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also write the attack used to this path.
    #[arg(long)]
    pub save_attack: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsSource {
    Equal,
    Orthogonal,
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    AllEqual,
    SumMod,
    Random,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct GhzArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub eps: Option<EpsSource>,
    /// JSON list of d ancilla vectors, each a list of [re, im] pairs.
    #[arg(long)]
    pub eps_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Ancilla level for `--eps equal|orthogonal` (default d).
    #[arg(long)]
    pub danc: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignArg {
    Pos,
    Neg,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConstraintsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, value_enum)]
    pub sign: Option<SignArg>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub danc: Option<usize>,
    /// Comma-separated detection caps, descending.
    #[arg(long, value_delimiter = ',')]
    pub caps: Option<Vec<f64>>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_evals: Option<usize>,
    /// Penalty weight on detection above the cap.
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long)]
    pub simplex_scale: Option<f64>,
}

fn strip_nulls(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(map) => map.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => Map::new(),
    }
}

/// Layers `flags` over the contents of `config` (if any). Keys in the config
/// file that the command does not know are rejected. Flag-only fields
/// (`config` itself, hidden hooks) come back as their defaults.
pub fn resolve<T>(flags: &T, config: Option<&PathBuf>) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Default + Clone,
{
    let Some(path) = config else { return Ok(flags.clone()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file: Value = serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let Value::Object(file) = file else {
        return Err(CliError::Usage(format!("{}: config must be a JSON object", path.display())));
    };
    let known = match serde_json::to_value(T::default()).expect("args serialize") {
        Value::Object(map) => map,
        _ => Map::new(),
    };
    if let Some(unknown) = file.keys().find(|k| !known.contains_key(*k)) {
        return Err(CliError::Usage(format!("{}: unknown config key `{unknown}`", path.display())));
    }
    let mut merged = file;
    merged.extend(strip_nulls(serde_json::to_value(flags).expect("args serialize")));
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
