use std::path::PathBuf;

use serde::Serialize;

/// Failures of the scenario runner.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Core(#[from] secfmcw::Error),
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("failed to parse {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("unknown experiment {name:?}; expected one of {}", .valid.join(", "))]
    UnknownExperiment { name: String, valid: Vec<String> },
    #[error("unknown sweep variable {path:?}; valid paths: {}", .valid.join(", "))]
    UnknownVariable { path: String, valid: Vec<String> },
    #[error("codebook design left {} codeword(s) above the mismatch limit: {indices:?}", .indices.len())]
    DesignFailed { indices: Vec<usize> },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type SimResult<T> = std::result::Result<T, SimError>;

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<serde_json::Value>,
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::Core(secfmcw::Error::Infeasible { .. }) | SimError::DesignFailed { .. } => "design_failed",
            SimError::Core(_) => "core",
            SimError::Validation(_) => "validation",
            SimError::Parse { .. } => "parse",
            SimError::UnknownExperiment { .. } => "unknown_experiment",
            SimError::UnknownVariable { .. } => "unknown_variable",
            SimError::Io { .. } => "io",
            SimError::Csv(_) => "csv",
            SimError::Json(_) => "json",
        }
    }

    /// JSON object printed by the CLI on failure.
    pub fn to_json(&self) -> String {
        let details = match self {
            SimError::Validation(v) => Some(serde_json::json!({ "violations": v })),
            SimError::UnknownVariable { valid, .. } => Some(serde_json::json!({ "valid_paths": valid })),
            SimError::UnknownExperiment { valid, .. } => Some(serde_json::json!({ "valid_experiments": valid })),
            SimError::DesignFailed { indices } | SimError::Core(secfmcw::Error::Infeasible { indices, .. }) => {
                Some(serde_json::json!({ "indices": indices }))
            }
            _ => None,
        };
        let report = ErrorReport {
            error: self.kind(),
            message: self.to_string(),
            details,
        };
        serde_json::to_string(&report).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind()))
    }
}
