use std::io;
use std::path::PathBuf;

use debias_core::corpus::CorpusError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("a sweep for {0:?} is already running")]
    SweepRunning(String),
    #[error("render: {0}")]
    Render(String),
    #[error("internal: {0}")]
    Internal(String),
    #[error(transparent)]
    Core(#[from] debias_core::Error),
}

impl From<CorpusError> for WorkbenchError {
    fn from(e: CorpusError) -> Self {
        WorkbenchError::Core(e.into())
    }
}

pub type Result<T, E = WorkbenchError> = std::result::Result<T, E>;

impl WorkbenchError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| WorkbenchError::Io { path, source }
    }

    pub fn json(context: impl Into<String>) -> impl FnOnce(serde_json::Error) -> Self {
        let context = context.into();
        move |source| WorkbenchError::Json { context, source }
    }

    fn is_io(&self) -> bool {
        matches!(
            self,
            WorkbenchError::Io { .. }
                | WorkbenchError::Core(debias_core::Error::Corpus(
                    CorpusError::Io { .. } | CorpusError::Stream(_),
                ))
                | WorkbenchError::Core(debias_core::Error::Ann(debias_core::ann::AnnError::Io(_)))
        )
    }

    /// 0 is success, 1 a validation error, 2 an I/O error.
    pub fn exit_code(&self) -> i32 {
        if self.is_io() {
            2
        } else {
            1
        }
    }

    /// HTTP status for the service.
    pub fn status(&self) -> u16 {
        match self {
            WorkbenchError::Invalid(_) => 400,
            WorkbenchError::Core(e) if e.is_invalid_input() => 400,
            WorkbenchError::SweepRunning(_) => 409,
            _ => 500,
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            WorkbenchError::Io { .. } => "io",
            WorkbenchError::Invalid(_) => "invalid_input",
            WorkbenchError::Json { .. } => "json",
            WorkbenchError::SweepRunning(_) => "sweep_running",
            WorkbenchError::Render(_) => "render",
            WorkbenchError::Internal(_) => "internal",
            WorkbenchError::Core(e) if e.is_invalid_input() => "invalid_input",
            WorkbenchError::Core(debias_core::Error::Corpus(_)) => "corpus",
            WorkbenchError::Core(debias_core::Error::Geometry(_)) => "geometry",
            WorkbenchError::Core(debias_core::Error::Ann(_)) => "index",
            WorkbenchError::Core(debias_core::Error::Eval(_)) => "evaluate",
            WorkbenchError::Core(_) => "tuner",
        }
    }
}
