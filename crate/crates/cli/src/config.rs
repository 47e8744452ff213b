//! Run configurations. Every document rejects unknown keys; relative paths
//! resolve against the directory of the configuration file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use noisylp::aicm::{Assumption, Target};
use noisylp::estimators::{PenaltyConfig, Pick};
use noisylp::inference::InferenceConfig;
use noisylp::montecarlo::{EstimatorKind, SimulationScenario};
use noisylp::{Error, LpDocument, Result};

/// An LP given inline or as a path to an LP file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LpSource {
    Path(PathBuf),
    Inline(LpDocument),
}

impl LpSource {
    pub fn load(&self, base: &Path) -> Result<LpDocument> {
        match self {
            LpSource::Inline(doc) => Ok(doc.clone()),
            LpSource::Path(p) => read_json(&base.join(p)),
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn all_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Plugin, EstimatorKind::Penalty, EstimatorKind::Debiased, EstimatorKind::Setexp]
}

fn default_kappa0() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default)]
    pub command: Option<String>,
    pub lp: LpSource,
    /// Sample size behind θ̂; needed for data-driven penalties and set expansion.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "all_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default = "default_kappa0")]
    pub kappa0: f64,
    #[serde(default)]
    pub pick: Pick,
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    #[default]
    Lower,
    Upper,
}

/// Where θ̂ and its covariance come from.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSource {
    /// CSV of per-observation θ_i rows in the order (p, vec M, c); the LP
    /// supplies dimensions and the box.
    Observations { lp: LpSource, data: PathBuf },
    /// One dataset drawn from a simulation design.
    Scenario { scenario: Box<SimulationScenario>, n: usize },
    /// θ_i = θ₀ + Σ^{1/2} ε_i with standard normal ε_i.
    Gaussian { lp: LpSource, sigma: Vec<Vec<f64>>, n: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferConfig {
    #[serde(default)]
    pub command: Option<String>,
    pub source: ThetaSource,
    #[serde(default)]
    pub inference: InferenceConfig,
    /// `upper` runs the procedure on `min (−p)'x` and reports `max p'x`.
    #[serde(default)]
    pub side: BoundSide,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Consistency,
    Inference,
    UniformGrid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub command: Option<String>,
    pub study: Study,
    pub scenario: SimulationScenario,
}

/// A population table given directly instead of microdata.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDocument {
    pub treatments: Vec<String>,
    pub instruments: Vec<String>,
    pub cell_mean: Vec<Vec<Option<f64>>>,
    pub cell_prob: Vec<Vec<f64>>,
    #[serde(default)]
    pub observed: Option<Vec<bool>>,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_reps() -> usize {
    500
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AicmConfig {
    #[serde(default)]
    pub command: Option<String>,
    /// Microdata CSV with columns `y,t,z`.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub table: Option<TableDocument>,
    /// Treatments whose outcomes are observed; default: those with any outcome.
    #[serde(default)]
    pub observed: Option<Vec<String>>,
    pub assumptions: Vec<Assumption>,
    pub target: Target,
    /// Confidence intervals need microdata; omitted when absent.
    #[serde(default)]
    pub inference: Option<InferenceConfig>,
    /// Level of the two-sided interval.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Bootstrap replications behind Σ̂.
    #[serde(default = "default_reps")]
    pub bootstrap_reps: usize,
    #[serde(default)]
    pub dump_lp: bool,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Rejects a `command` key naming another command.
pub fn check_command(found: &Option<String>, expected: &str) -> Result<()> {
    match found {
        Some(c) if c != expected => {
            Err(Error::InvalidArgument(format!("configuration is for `{c}`, not `{expected}`")))
        }
        _ => Ok(()),
    }
}
