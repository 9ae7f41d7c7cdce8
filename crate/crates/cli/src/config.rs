//! Run configuration: a TOML file plus `--set key=value` overrides. All
//! defaults end up echoed in the manifest so runs are self-describing.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use modalflow_core::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    TrineStatic,
    JumpGeneric,
    BohmTrajectory,
    ContinuumSweep,
    HusimiOscillator,
    BohmOscillator,
    ClassicalLimit,
    VerifyAll,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::TrineStatic => "trine_static",
            Experiment::JumpGeneric => "jump_generic",
            Experiment::BohmTrajectory => "bohm_trajectory",
            Experiment::ContinuumSweep => "continuum_sweep",
            Experiment::HusimiOscillator => "husimi_oscillator",
            Experiment::BohmOscillator => "bohm_oscillator",
            Experiment::ClassicalLimit => "classical_limit",
            Experiment::VerifyAll => "verify_all",
        }
    }
}

/// Experiment parameters. Every field has a default; experiments read the
/// ones they understand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Oscillator (or Rabi) angular frequency.
    pub omega: f64,
    /// Number-state index for fock scenarios; ignored when beta is set.
    pub n: Option<usize>,
    pub beta_re: f64,
    pub beta_im: f64,
    /// Initial phase-space point for single-trajectory experiments.
    pub alpha0_re: f64,
    pub alpha0_im: f64,
    /// Initial position for Bohm trajectories (defaults to √2·alpha0_re).
    pub x0: Option<f64>,
    pub t_max: f64,
    pub dt: f64,
    pub count: usize,
    pub truncation: usize,
    /// Lattice spacings for the continuum sweep.
    pub epsilons: Vec<f64>,
    /// Cubic coupling for the continuum sweep.
    pub kappa: f64,
    /// Lattice model kind: "quadratic" or "cubic".
    pub model: String,
    /// Phase gradient of the probe state in the quadratic sweep.
    pub k_phase: f64,
    /// Number-state indices for the classical-limit family.
    pub family: Vec<usize>,
    /// Samples per family member (classical limit) or recorded
    /// trajectories (jump experiments).
    pub samples: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            omega: 1.0,
            n: None,
            beta_re: 1.0,
            beta_im: 0.0,
            alpha0_re: 1.0,
            alpha0_im: 0.0,
            x0: None,
            t_max: 20.0,
            dt: 1e-3,
            count: 100_000,
            truncation: 64,
            epsilons: vec![1e-1, 3e-2, 1e-2, 3e-3],
            kappa: 0.5,
            model: "quadratic".into(),
            k_phase: 0.7,
            family: vec![1, 4, 16, 64],
            samples: 200,
        }
    }
}

impl Params {
    pub fn beta(&self) -> C64 {
        C64::new(self.beta_re, self.beta_im)
    }

    pub fn alpha0(&self) -> C64 {
        C64::new(self.alpha0_re, self.alpha0_im)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Mandatory: every run is reproducible from its seed.
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub params: Params,
}

/// Configuration-stage failure, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

/// Parse the TOML file, apply dotted-path `--set` overrides, and
/// deserialize.
pub fn load_config(path: &std::path::Path, sets: &[String]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    for set in sets {
        apply_set(&mut table, set)?;
    }
    let value = toml::Value::Table(table);
    value
        .try_into()
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

fn apply_set(table: &mut toml::Table, set: &str) -> Result<(), ConfigError> {
    let (path, raw) = set
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("--set expects key=value, got `{set}`")))?;
    // Interpret the value as a TOML literal; fall back to a plain string.
    let value: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = table;
    let parts: Vec<&str> = path.split('.').collect();
    for key in &parts[..parts.len() - 1] {
        node = node
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError(format!("`{key}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
