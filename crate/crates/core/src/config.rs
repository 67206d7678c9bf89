//! Experiment parameters read from TOML files (or from the `config` block of
//! a run manifest), with command-line flags applied on top.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cnls::SimConfig;
use crate::error::{Error, Result};
use crate::manifest::RunManifest;

/// Parameters of the `resonances` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceParams {
    pub radius: i64,
    pub budget: u64,
}

impl Default for ResonanceParams {
    fn default() -> Self {
        Self {
            radius: 6,
            budget: 1_000_000_000,
        }
    }
}

/// Parameters of the `pendulum` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumParams {
    pub gamma: f64,
    pub dt: f64,
    /// Defaults to one full period `2 T_gamma`.
    pub t_end: Option<f64>,
    /// Write every `stride`-th step.
    pub stride: u64,
    /// Extra values of gamma whose periods are reported (computed in parallel).
    pub sweep: Vec<f64>,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            dt: 1e-3,
            t_end: None,
            stride: 10,
            sweep: Vec::new(),
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            bad.push(format!("gamma must lie in (0, 1/2), got {}", self.gamma));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bad.push(format!("dt must be positive, got {}", self.dt));
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                bad.push(format!("t_end must be nonnegative, got {t}"));
            }
        }
        if self.stride == 0 {
            bad.push("stride must be at least 1".into());
        }
        for g in &self.sweep {
            if !(*g > 0.0 && *g < 0.5) {
                bad.push(format!("sweep value {g} outside (0, 1/2)"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// Read parameters of type `T` from `path`. A `.json` file is taken to be a
/// run manifest and its recorded configuration is used; anything else is
/// parsed as TOML. Missing keys take their defaults, unknown keys are errors.
pub fn load_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_value(manifest.config)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }
}

/// Load and validate a simulation configuration; returns it with its
/// warnings.
pub fn load_config(path: &Path) -> Result<(SimConfig, Vec<String>)> {
    let cfg: SimConfig = load_file(path)?;
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}
