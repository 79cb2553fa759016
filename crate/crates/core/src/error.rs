use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("out of window: {0}")]
    OutOfWindow(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("missing leaf mass for vertex {0}")]
    MissingLeaf(usize),

    #[error("non-positive mass at vertex {0}")]
    NonPositiveMass(usize),

    #[error("invalid trapezoid: {0}")]
    InvalidTrapezoid(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("window too small: no admissible trapezoid of mass > {sigma} contains vertex {vertex}")]
    WindowTooSmall { vertex: usize, sigma: String },

    #[error("exponent {0} is not a supported integer")]
    NonIntegerExponent(String),

    #[error("function is constant")]
    ConstantFunction,

    #[error("sharp maximal function vanishes identically")]
    SharpVanishes,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("alpha too small: {0}")]
    AlphaTooSmall(String),

    #[error("support is already admissible for the target family")]
    NotRebaseNeeded,

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfWindow(_) => "OutOfWindow",
            Error::InvalidTree(_) => "InvalidTree",
            Error::MissingLeaf(_) => "MissingLeaf",
            Error::NonPositiveMass(_) => "NonPositiveMass",
            Error::InvalidTrapezoid(_) => "InvalidTrapezoid",
            Error::InvalidParams(_) => "InvalidParams",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::WindowTooSmall { .. } => "WindowTooSmall",
            Error::NonIntegerExponent(_) => "NonIntegerExponent",
            Error::ConstantFunction => "ConstantFunction",
            Error::SharpVanishes => "SharpVanishes",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::AlphaTooSmall(_) => "AlphaTooSmall",
            Error::NotRebaseNeeded => "NotRebaseNeeded",
            Error::Parse(_) => "Parse",
        }
    }
}
