use thiserror::Error;

/// Failure categories surfaced by the library and mapped to CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("material error: {0}")]
    Material(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("boundary-condition error: {0}")]
    BoundaryCondition(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("configuration error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    /// Wrap with the name of the pipeline stage that failed.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage { stage: stage.into(), source: Box::new(self) }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code: 2 for invalid input, 3 for numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Geometry(_) | Error::Material(_) | Error::Shape(_) | Error::Json(_) => 2,
            Error::Solver(_) | Error::BoundaryCondition(_) => 3,
            _ => 1,
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
