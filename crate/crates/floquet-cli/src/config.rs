//! Run configuration: a TOML document fully describing one experiment, so
//! that re-running the same file reproduces every replicate bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use floquet_core::cocycle::ModelSpec;
use floquet_core::principal::EstimatorConfig;

use crate::Failure;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub run: RunSection,
    /// Second model of a `compare` run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit: Option<OrbitSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_cap: Option<u32>,
    /// Focusing power T; omitted = derived from the model pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u32>,
    #[serde(default)]
    pub keep_trace: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareSection {
    pub model: ModelSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitSection {
    #[serde(default)]
    pub anchor: i64,
    #[serde(default = "default_span")]
    pub backward: u32,
    #[serde(default = "default_span")]
    pub forward: u32,
}

fn default_span() -> u32 {
    20
}

impl Default for OrbitSection {
    fn default() -> Self {
        Self {
            anchor: 0,
            backward: 20,
            forward: 20,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Failure::config(format!("cannot parse {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.run.seeds.is_empty() {
            return Err(Failure::config("run.seeds must not be empty".into()));
        }
        if self.run.horizon == 0 {
            return Err(Failure::config("run.horizon must be positive".into()));
        }
        self.model
            .validate()
            .map_err(|e| Failure::config(format!("invalid model: {e}")))?;
        if let Some(cmp) = &self.compare {
            cmp.model
                .validate()
                .map_err(|e| Failure::config(format!("invalid compare model: {e}")))?;
        }
        Ok(())
    }

    /// Estimator knobs with the CLI overrides applied.
    pub fn estimator(&self, workers: Option<usize>, horizon: Option<u64>) -> EstimatorConfig {
        let mut cfg = EstimatorConfig::new(horizon.unwrap_or(self.run.horizon));
        cfg.burn_in = self.run.burn_in;
        if let Some(tol) = self.run.tolerance {
            cfg.tolerance = tol;
        }
        if let Some(cap) = self.run.depth_cap {
            cfg.depth_cap = cap;
        }
        cfg.step = self.run.step;
        cfg.workers = workers;
        cfg.keep_trace = self.run.keep_trace;
        cfg
    }
}
