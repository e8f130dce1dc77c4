use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("invalid vertex {0}")]
    InvalidVertex(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration does not match the lattice: {0}")]
    DimensionMismatch(String),
    #[error("method not applicable: {0}")]
    MethodInapplicable(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::InsufficientSamples(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
