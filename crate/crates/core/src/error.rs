use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular argument: {0}")]
    SingularArgument(String),
    #[error("branch error: {0}")]
    Branch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("series diverges ({0}); use direct mode")]
    SeriesDivergence(String),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("no convergence after {iterations} iterations: {trace}")]
    NoConvergence { iterations: usize, trace: String },
    #[error("predictor not applicable: {0}")]
    NotApplicable(String),
    #[error("out of scope: {0}")]
    OutOfScope(String),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::SingularArgument(_) => "singular_argument",
            Error::Branch(_) => "branch",
            Error::Domain(_) => "domain",
            Error::SeriesDivergence(_) => "series_divergence",
            Error::SingularSystem(_) => "singular_system",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NotApplicable(_) => "not_applicable",
            Error::OutOfScope(_) => "out_of_scope",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
