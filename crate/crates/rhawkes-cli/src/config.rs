//! Run configuration: a TOML tree with `[model]`, `[grid]`, optional
//! `[costs]` and `[run]` sections. Unknown keys are rejected.
//!
//! ```toml
//! [model]
//! eta = 2.0
//! class = "r1"
//! baseline = { kind = "linear", slope = 2.0 }
//! kernel = { kind = "exponential", beta = 2.0 }
//! exogenous = { kind = "exponential", gamma = 1.0 }
//!
//! [grid]
//! delta = 0.005
//! horizon = 2.5
//!
//! [costs]
//! c_f = 1.5
//! c_i = 2.0
//! c_o = 1.0
//! c_ip = 5.0
//! c_p = 10.0
//!
//! [run]
//! seed = 42
//! output = "out"
//! ```

use std::path::{Path, PathBuf};

use renewal_hawkes::maintenance::CostParams;
use renewal_hawkes::{
    BaselineHazard, ExogenousLaw, Grid, ModelSpec, OffspringKernel, ProcessClass,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Whole configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub costs: Option<CostConfig>,
    #[serde(default)]
    pub run: RunSection,
}

/// `[model]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub eta: f64,
    /// Default class for commands that take one; `r1`, `r2`, `r3`, `classical` or `wfs`.
    #[serde(default)]
    pub class: Option<String>,
    pub baseline: BaselineConfig,
    pub kernel: KernelConfig,
    pub exogenous: ExogenousConfig,
}

/// Baseline hazard `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BaselineConfig {
    Linear { slope: f64 },
    Constant { rate: f64 },
    Piecewise { starts: Vec<f64>, rates: Vec<f64> },
    Tabulated { step: f64, values: Vec<f64> },
}

/// Offspring density `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelConfig {
    Exponential { beta: f64 },
    Tabulated { step: f64, values: Vec<f64> },
}

/// Law of the exogenous renewal variable `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExogenousConfig {
    Exponential { gamma: f64 },
    Dirac { c1: f64 },
    Tabulated { step: f64, density: Vec<f64> },
}

/// `[grid]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub delta: f64,
    pub horizon: f64,
}

/// `[costs]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub c_f: f64,
    pub c_i: f64,
    pub c_o: f64,
    pub c_ip: f64,
    pub c_p: f64,
}

/// `[run]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a configuration from TOML text.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
    }

    /// Reads and parses a configuration file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The model with its configured class (`r1` when absent).
    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let m = &self.model;
        let baseline = match &m.baseline {
            BaselineConfig::Linear { slope } => BaselineHazard::linear(*slope),
            BaselineConfig::Constant { rate } => BaselineHazard::constant(*rate),
            BaselineConfig::Piecewise { starts, rates } => {
                BaselineHazard::piecewise(starts.clone(), rates.clone())
            }
            BaselineConfig::Tabulated { step, values } => {
                BaselineHazard::tabulated(*step, values.clone())
            }
        }
        .map_err(|e| field_error("model.baseline", e))?;
        let kernel = match &m.kernel {
            KernelConfig::Exponential { beta } => OffspringKernel::exponential(*beta),
            KernelConfig::Tabulated { step, values } => {
                OffspringKernel::tabulated(*step, values.clone())
            }
        }
        .map_err(|e| field_error("model.kernel", e))?;
        let exogenous = match &m.exogenous {
            ExogenousConfig::Exponential { gamma } => ExogenousLaw::exponential(*gamma),
            ExogenousConfig::Dirac { c1 } => ExogenousLaw::dirac(*c1),
            ExogenousConfig::Tabulated { step, density } => {
                ExogenousLaw::tabulated(*step, density.clone())
            }
        }
        .map_err(|e| field_error("model.exogenous", e))?;
        let class = match &m.class {
            Some(c) => ProcessClass::parse(c).map_err(|e| field_error("model.class", e))?,
            None => ProcessClass::R1,
        };
        ModelSpec::new(baseline, kernel, m.eta, exogenous, class)
            .map_err(|e| field_error("model", e))
    }

    /// The configured grid.
    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.grid.delta, self.grid.horizon).map_err(|e| field_error("grid", e))
    }

    /// The configured costs; a missing section is a configuration error.
    pub fn costs(&self) -> Result<CostParams, CliError> {
        let c = self
            .costs
            .ok_or_else(|| CliError::Config("missing section [costs]".into()))?;
        CostParams::new(c.c_f, c.c_i, c.c_o, c.c_ip, c.c_p).map_err(|e| field_error("costs", e))
    }

    /// SHA-256 of the canonical JSON form of `[model]`.
    pub fn model_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.model).expect("model serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

fn field_error(field: &str, e: renewal_hawkes::Error) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

/// The example configuration: `mu = 2t`, `h = 2 exp(-2t)`, `eta = 2`, `Y ~ Exp(1)`.
pub const PAPER_CONFIG: &str = r#"[model]
eta = 2.0
class = "r1"
baseline = { kind = "linear", slope = 2.0 }
kernel = { kind = "exponential", beta = 2.0 }
exogenous = { kind = "exponential", gamma = 1.0 }

[grid]
delta = 0.005
horizon = 2.5

[costs]
c_f = 1.5
c_i = 2.0
c_o = 1.0
c_ip = 5.0
c_p = 10.0
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_config_round_trips() {
        let c = RunConfig::parse(PAPER_CONFIG, "paper").unwrap();
        let m = c.model_spec().unwrap();
        assert_eq!(m.eta, 2.0);
        assert_eq!(c.grid().unwrap().n, 500);
        assert_eq!(c.costs().unwrap().c_p, 10.0);
        assert_eq!(c.model_hash().len(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = PAPER_CONFIG.replace("\neta = 2.0", "\neta = 2.0\netta = 1.0");
        let err = RunConfig::parse(&text, "cfg").unwrap_err().to_string();
        assert!(err.contains("etta"), "{err}");
        let text = PAPER_CONFIG.replace("slope = 2.0", "slope = 2.0, slop = 1.0");
        assert!(RunConfig::parse(&text, "cfg").is_err());
    }

    #[test]
    fn missing_cost_field_is_named() {
        let text = PAPER_CONFIG.replace("c_p = 10.0\n", "");
        let err = RunConfig::parse(&text, "cfg").unwrap_err().to_string();
        assert!(err.contains("c_p"), "{err}");
    }

    #[test]
    fn hash_tracks_the_model_only() {
        let a = RunConfig::parse(PAPER_CONFIG, "a").unwrap();
        let b =
            RunConfig::parse(&PAPER_CONFIG.replace("delta = 0.005", "delta = 0.01"), "b").unwrap();
        let c = RunConfig::parse(&PAPER_CONFIG.replace("\neta = 2.0", "\neta = 1.5"), "c").unwrap();
        assert_eq!(a.model_hash(), b.model_hash());
        assert_ne!(a.model_hash(), c.model_hash());
    }
}
