//! Scenario files: JSON descriptions of one experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use sparsefilt::filters::{Algorithm, FilterConfig};
use sparsefilt::gain::GainParams;
use sparsefilt::harness::{ExperimentConfig, InputModel, DEFAULT_STEADY_WINDOW, DEFAULT_STRIDE};
use sparsefilt::signal::{gen_sparse_system, SparseSystem};

use crate::CliError;

fn default_epsilon() -> f64 {
    10.0
}

fn default_input() -> InputModel {
    InputModel::White { variance: 1.0 }
}

fn default_stride() -> usize {
    DEFAULT_STRIDE
}

fn default_window() -> f64 {
    DEFAULT_STEADY_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Filter length.
    pub l: usize,
    /// `[index, value]` pairs, zero-based.
    pub active_taps: Vec<(usize, f64)>,
    pub mu: f64,
    pub rho: f64,
    pub delta_p: f64,
    pub rho_g: f64,
    pub delta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub sigma_v2: f64,
    #[serde(default = "default_input")]
    pub input: InputModel,
    pub iterations: usize,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_window")]
    pub steady_window: f64,
    #[serde(default)]
    pub clamp_zero_crossing: bool,
    /// Exit nonzero when any trial diverges.
    #[serde(default)]
    pub fail_on_divergence: bool,
}

impl Scenario {
    pub fn system(&self) -> Result<SparseSystem<f64>, CliError> {
        gen_sparse_system(self.l, &self.active_taps).map_err(|e| CliError::Schema(format!("active_taps: {e}")))
    }

    pub fn gain_params(&self) -> GainParams<f64> {
        GainParams {
            rho_g: self.rho_g,
            delta: self.delta,
        }
    }

    pub fn filter(&self, algorithm: Algorithm) -> FilterConfig<f64> {
        FilterConfig {
            algorithm,
            mu: self.mu,
            delta_p: self.delta_p,
            gain_params: self.gain_params(),
            rho: self.rho,
            epsilon: self.epsilon,
            clamp_zero_crossing: self.clamp_zero_crossing,
        }
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let cfg = ExperimentConfig {
            system: self.system()?,
            input: self.input,
            noise_variance: self.sigma_v2,
            filters: self.algorithms.iter().map(|&a| self.filter(a)).collect(),
            iterations: self.iterations,
            trials: self.trials,
            seed: self.seed,
            stride: self.stride,
            steady_window: self.steady_window,
        };
        cfg.validate().map_err(|e| CliError::Schema(e.to_string()))?;
        Ok(cfg)
    }
}

/// Sets `key` (dotted for nested objects, e.g. `input.pole`) to `raw`,
/// parsed as JSON when possible and kept as a string otherwise.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<(), CliError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut target = doc;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let obj = target
            .as_object_mut()
            .ok_or_else(|| CliError::Schema(format!("override {key}: {part} is not inside an object")))?;
        if parts.peek().is_none() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        target = obj
            .get_mut(part)
            .ok_or_else(|| CliError::Schema(format!("override {key}: no field {part}")))?;
    }
    Err(CliError::Schema(format!("override {key:?} is empty")))
}

/// Parses `K=V`.
pub fn split_override(s: &str) -> Result<(&str, &str), CliError> {
    s.split_once('=')
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| CliError::Schema(format!("override {s:?} is not of the form KEY=VALUE")))
}

/// Reads a scenario and applies overrides in order.
pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut doc: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    for (k, v) in overrides {
        apply_override(&mut doc, k, v)?;
    }
    serde_json::from_value(doc).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}
