use std::path::PathBuf;

/// CLI failure, grouped by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("stage '{stage}' failed: {source}")]
    Stage { stage: &'static str, source: Box<CliError> },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
            CliError::Stage { source, .. } => source.exit_code(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<credo_core::Error> for CliError {
    fn from(e: credo_core::Error) -> Self {
        use credo_core::Error as E;
        match e {
            E::Param(_) => CliError::Config(e.to_string()),
            E::Numeric(_) => CliError::Numeric(e.to_string()),
            E::Parse { .. } | E::Data(_) | E::Dimension { .. } => CliError::Data(e.to_string()),
        }
    }
}

/// Tags a result with the pipeline stage it came from.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<CliError>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| CliError::Stage { stage, source: Box::new(e.into()) })
    }
}
