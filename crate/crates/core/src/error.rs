use thiserror::Error;

pub type Result<T> = std::result::Result<T, OdxuError>;

#[derive(Debug, Error)]
pub enum OdxuError {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("class index {index} outside label space of {n_classes} classes")]
    ClassOutOfRange { index: usize, n_classes: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite loss in {phase} at epoch {epoch}, batch {batch}")]
    NonFinite {
        phase: &'static str,
        epoch: usize,
        batch: usize,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("checkpoint is missing required section `{0}`")]
    MissingSection(String),

    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),

    #[error(
        "base model made no mistakes on the metamodel source set; \
         build the metamodel set from a harder (held-out or noisier) split"
    )]
    NoMisclassified,

    #[error("metamodel mismatch: {0}")]
    MetamodelMismatch(String),

    #[error("config: {0}")]
    Config(String),

    /// Failure inside a named pipeline stage.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        source: Box<OdxuError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl OdxuError {
    /// Errors caused by bad user input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        if let OdxuError::Stage { source, .. } = self {
            return source.is_validation();
        }
        matches!(
            self,
            OdxuError::InvalidInput(_)
                | OdxuError::UnknownClass(_)
                | OdxuError::InvalidScenario(_)
                | OdxuError::Config(_)
                | OdxuError::ClassOutOfRange { .. }
        )
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(OdxuError::InvalidInput(msg.into()))
}
