use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("unstable dynamics: {0}")]
    Unstable(String),

    #[error("{solver} did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("degenerate variance {value:e} at step {step}")]
    Degenerate { step: usize, value: f64 },

    #[error("matrix not positive definite: {0}")]
    Conditioning(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("observation {value} outside likelihood support: {reason}")]
    Support { value: f64, reason: &'static str },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("steady-state solve failed at gamma = {gamma:e}: {source}")]
    Grid { gamma: f64, source: Box<Error> },
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ParameterDomain(_) => "parameter-domain",
            Error::Unstable(_) => "stability",
            Error::NoConvergence { .. } => "convergence",
            Error::Degenerate { .. } => "numerical-degeneracy",
            Error::Conditioning(_) => "conditioning",
            Error::Dimension(_) => "dimension",
            Error::Support { .. } => "domain",
            Error::Input(_) => "input",
            Error::Grid { .. } => "grid",
        }
    }
}
