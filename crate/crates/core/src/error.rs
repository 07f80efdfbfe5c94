use thiserror::Error;

/// Errors raised anywhere in the inference stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("model error: {0}")]
    Model(String),

    #[error("oracle limit: {atoms} atoms exceeds cap of {cap}")]
    OracleLimit { atoms: usize, cap: usize },

    #[error("invalid factorization: {0}")]
    Factorization(String),

    #[error("atoms not jointly accessible under factorization: {0}")]
    NotInJd(String),

    #[error("coverage violation: ground formula {0} is not jointly accessible")]
    Coverage(String),

    #[error("invalid region graph: {0}")]
    RegionGraph(String),

    #[error("relation does not hold: {0}")]
    Relation(String),

    #[error("intractable for exact oracle: {0}")]
    Intractable(String),

    #[error("attachment target absent from factorization: {0}")]
    Attachment(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
