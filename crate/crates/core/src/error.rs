use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RomError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch { context: &'static str, expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("requested {requested} modes but the snapshot set has numerical rank {effective}")]
    RankDeficient { requested: usize, effective: usize },

    #[error("projected viscous operator is not negative definite (largest eigenvalue {0:e})")]
    IndefiniteDamping(f64),

    #[error("integration blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("every tuner evaluation was unstable; retry with a larger mu_e search scale")]
    AllUnstable,

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    #[error("stage `{stage}` failed")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<RomError>,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RomError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> RomError {
    RomError::InvalidArgument { name, reason: reason.into() }
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(RomError::DimensionMismatch { context, expected, got })
    }
}

pub(crate) fn check_finite<'a>(context: &'static str, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(RomError::NonFinite(context))
    }
}
