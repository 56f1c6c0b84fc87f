use std::path::PathBuf;

/// Errors raised by the pipeline. Each variant maps onto one process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("{file}: {malformed} of {total} rows malformed (first: line {first_line}: {first_message})")]
    Malformed {
        file: PathBuf,
        malformed: usize,
        total: usize,
        first_line: u64,
        first_message: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// 2 for configuration problems, 3 for bad or missing data, 4 for contract violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Data(_) | Error::Malformed { .. } => 3,
            Error::Contract(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Data(e.to_string())
    }
}
