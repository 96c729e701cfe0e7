//! JSON run configuration. Parsing is strict: unknown keys are rejected so
//! a typo cannot silently change a scientific run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Estimate,
    Replicate,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    YuleWalker,
    LocalConstant,
    LocalLinear,
    Ridge,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::YuleWalker => "yule_walker",
            MethodName::LocalConstant => "local_constant",
            MethodName::LocalLinear => "local_linear",
            MethodName::Ridge => "ridge",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// "gaussian" | "epanechnikov"
    pub family: String,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    /// u = t/T on [h, 1-h] for boundary-biased methods (Yule-Walker and
    /// local-constant), the full interior grid otherwise.
    Default,
    /// `count` points evenly spaced on [lo, hi].
    Uniform { count: usize, lo: f64, hi: f64 },
    /// Explicit strictly increasing points in (0, 1).
    Explicit { points: Vec<f64> },
}

/// One batch run. Optional fields have per-command defaults; the resolved
/// configuration (with every default filled in) is echoed into the run's
/// metadata so the run can be reproduced exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// "builtin:zero_mean_r6", "builtin:mean_r3", or a path to a
    /// curve-table CSV (columns u, mu entries, A entries row-major).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Input panel CSV for `estimate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panel: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    /// Exactly two methods for `compare`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<MethodName>>,
    /// Ridge penalty; only read when a ridge method is selected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    /// Sample size T. Defaults to the builtin design's size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_len: Option<usize>,
    /// Replication count M for `replicate`/`compare`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Innovation covariance for custom models, row-major r*r entries.
    /// Builtin models always use the identity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub innovation_cov: Option<Vec<f64>>,
}

/// Metadata written next to every run's artifacts. The `config` field is a
/// fully resolved [`RunConfig`]; feeding this file back through `--config`
/// reproduces the run byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

/// Parse a config file's text. A metadata file (recognized by its `config`
/// key) is unwrapped to its embedded config, so re-running from emitted
/// metadata works directly.
pub fn parse_config(text: &str) -> Result<RunConfig, String> {
    let probe: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let is_metadata = probe.get("config").is_some();
    if is_metadata {
        let meta: RunMetadata =
            serde_json::from_str(text).map_err(|e| format!("invalid metadata file: {e}"))?;
        Ok(meta.config)
    } else {
        serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))
    }
}
