use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("out of vocabulary: {0}")]
    OutOfVocabulary(String),

    #[error("model is not fitted")]
    NotFitted,

    #[error("training failed: {0}")]
    Training(String),

    #[error("SMO did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("loss diverged (non-finite) at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("checksum mismatch in blob `{0}`")]
    Checksum(String),

    #[error("model container: {0}")]
    Container(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Validation,
    Training,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Usage,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Stratification(_)
            | Error::UndefinedMetric(_)
            | Error::DimensionMismatch { .. }
            | Error::OutOfVocabulary(_)
            | Error::Checksum(_)
            | Error::Container(_)
            | Error::Json(_) => ErrorClass::Validation,
            Error::NotFitted
            | Error::Training(_)
            | Error::NoConvergence { .. }
            | Error::Diverged { .. } => ErrorClass::Training,
            Error::Io(_) => ErrorClass::Io,
            Error::Stage { source, .. } => source.class(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
