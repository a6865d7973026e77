//! Shared error type for the whole crate.

use thiserror::Error;

/// One entry of a per-class shortage report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeficitEntry {
    pub class: usize,
    pub needed: usize,
    pub available: usize,
}

impl std::fmt::Display for DeficitEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "class {}: need {}, have {}",
            self.class, self.needed, self.available
        )
    }
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("class deficit in {context}: {}", format_deficits(.entries))]
    ClassDeficit {
        context: String,
        entries: Vec<DeficitEntry>,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("backward root must be a scalar, found length {0}")]
    NonScalarRoot(usize),

    #[error("training diverged at step {step}: {what}")]
    TrainingDiverged { step: usize, what: String },

    #[error("release target unachievable ({reason}); achievable subset size {achievable}")]
    UnachievableRelease { reason: String, achievable: usize },

    #[error("zero vector not allowed in {0}")]
    ZeroVector(&'static str),

    #[error("unknown figure id: {0}")]
    UnknownFigure(String),

    #[error("unknown domain tag: {0}")]
    UnknownDomain(String),

    #[error("config parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<CoreError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CoreError {
    /// Tag an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &str) -> CoreError {
        CoreError::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}

fn format_deficits(entries: &[DeficitEntry]) -> String {
    entries
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, CoreError>;
