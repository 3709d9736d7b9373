use std::path::PathBuf;

use bilayer_core::ed::EdError;
use bilayer_core::fss::FssError;
use bilayer_core::lattice::LatticeError;
use bilayer_core::replica::ReplicaError;
use bilayer_core::sse::CouplingsError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io ({path}): {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse: {0}")]
    TomlParse(#[from] toml::de::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("lattice: {0}")]
    Lattice(#[from] LatticeError),
    #[error("couplings: {0}")]
    Couplings(#[from] CouplingsError),
    #[error("replica: {0}")]
    Replica(#[from] ReplicaError),
    #[error("exact diagonalization: {0}")]
    Ed(#[from] EdError),
    #[error("analysis: {0}")]
    Fss(#[from] FssError),
    #[error("checkpoint ({path}): {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("stopped after {completed_bins} bins as requested; outputs not written")]
    StoppedEarly { completed_bins: u64 },
    #[error("usage: {0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable tag for the error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::TomlParse(_) => "config-parse",
            CliError::Json(_) => "json",
            CliError::Csv(_) => "csv",
            CliError::Lattice(_) => "lattice",
            CliError::Couplings(_) => "couplings",
            CliError::Replica(_) => "replica",
            CliError::Ed(_) => "ed",
            CliError::Fss(_) => "analysis",
            CliError::Checkpoint { .. } => "checkpoint",
            CliError::StoppedEarly { .. } => "stopped-early",
            CliError::Usage(_) => "usage",
        }
    }

    /// Process exit code: 2 for usage/config problems, 3 for a requested
    /// early stop, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::TomlParse(_) => 2,
            CliError::StoppedEarly { .. } => 3,
            _ => 1,
        }
    }
}

/// The machine-readable form printed to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport<'a> {
    pub kind: &'a str,
    pub message: String,
}

impl CliError {
    pub fn report(&self) -> ErrorReport<'_> {
        ErrorReport {
            kind: self.kind(),
            message: self.to_string(),
        }
    }
}
