use std::path::{Path, PathBuf};

use prospect::experiments::{LinearModelSpec, PhaseTransitionConfig, ScalingConfig};
use prospect::solvers::DRConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Failure;

/// Reads a JSON config, or the type's defaults when no path is given.
pub fn load_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxFile {
    /// Kind and its parameters, e.g. `{"kind": "huber", "rho": 1}`.
    pub prox: Option<Value>,
    pub gamma: Option<f64>,
    pub eta: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrexFile {
    pub x: Option<PathBuf>,
    pub z: Option<PathBuf>,
    /// Synthetic data instead of `x` and `z`.
    pub model: Option<LinearModelSpec>,
    pub alpha: f64,
    pub q: f64,
    pub solver: DRConfig,
    pub dr_sel_k0: Option<usize>,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

impl Default for TrexFile {
    fn default() -> Self {
        Self {
            x: None,
            z: None,
            model: None,
            alpha: 0.5,
            q: 2.0,
            solver: DRConfig::default(),
            dr_sel_k0: None,
            workers: 1,
            out: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(transparent)]
pub struct PhaseFile(pub PhaseTransitionConfig);

#[derive(Debug, Default, Deserialize)]
#[serde(transparent)]
pub struct ScalingFile(pub ScalingConfig);
