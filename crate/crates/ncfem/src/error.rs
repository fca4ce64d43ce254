use ncfem_core::FemError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: String, source: Box<Error> },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    /// Process exit status for this failure: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
