//! JSON wire types shared by the HTTP service and its client.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::experiment::{ComparisonRow, Files, SweepRow};
use crate::provisioner::{AllocationDecision, ControllerSpec, LoopTelemetry};
use crate::sim::RunMetrics;

/// Scenario text plus the command-line style overrides applied on top.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSource {
    /// Contents of a scenario file; empty means all defaults.
    #[serde(default)]
    pub scenario: String,
    /// `key=value` overrides, applied in order after the file.
    #[serde(default)]
    pub overrides: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    #[serde(flatten)]
    pub source: ScenarioSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResponse {
    pub metrics: RunMetrics,
    pub telemetry: LoopTelemetry,
    pub flagged_steps: u64,
    /// `run.output` from the scenario, if set.
    pub output: Option<String>,
    pub files: Files,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareRequest {
    #[serde(flatten)]
    pub source: ScenarioSource,
    /// Labels like `hinf-siso`, bare filter names, or `all`. Empty means all six.
    #[serde(default)]
    pub controllers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResponse {
    pub rows: Vec<ComparisonRow>,
    pub output: Option<String>,
    pub files: Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRequest {
    #[serde(flatten)]
    pub source: ScenarioSource,
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResponse {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    pub output: Option<String>,
    pub files: Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRequest {
    /// Trace CSV contents.
    pub trace: String,
    /// Controller settings come from the scenario's `controller.*` keys.
    #[serde(flatten)]
    pub source: ScenarioSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayResponse {
    pub telemetry: LoopTelemetry,
    pub output: Option<String>,
    pub files: Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateLoopRequest {
    #[serde(flatten)]
    pub source: ScenarioSource,
    /// Number of tracked components (2 for web + database).
    #[serde(default = "two")]
    pub components: usize,
}

fn two() -> usize {
    2
}

/// One control interval's input: either the already smoothed observation or
/// the raw sub-interval samples, which are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObserveRequest {
    Observation { observation: Vec<f64> },
    Samples { samples: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopStatus {
    pub id: u64,
    pub components: usize,
    pub spec: ControllerSpec,
    /// Allocation currently in force.
    pub allocation: Vec<f64>,
    pub telemetry: LoopTelemetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserveResponse {
    pub id: u64,
    pub decision: AllocationDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

/// Error body returned with every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    /// Machine-readable category, e.g. `parse`, `usage`, `schema`, `not_found`.
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl ApiError {
    pub fn new(error: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            error: error.into(),
            message: message.into(),
            line: None,
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}: line {line}: {}", self.error, self.message),
            None => write!(f, "{}: {}", self.error, self.message),
        }
    }
}

impl From<&Error> for ApiError {
    fn from(e: &Error) -> Self {
        let code = match e {
            Error::Usage(_) => "usage",
            Error::Input(_) => "input",
            Error::Singular { .. } => "singular",
            Error::NonFinite(_) => "non_finite",
            Error::Infeasible { .. } => "infeasible",
            Error::WarmingUp { .. } => "warming_up",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
        };
        match e {
            Error::Parse { line, message } => ApiError {
                error: code.into(),
                message: message.clone(),
                line: Some(*line),
            },
            Error::Usage(m) | Error::Input(m) | Error::Schema(m) => ApiError::new(code, m.clone()),
            other => ApiError::new(code, other.to_string()),
        }
    }
}
