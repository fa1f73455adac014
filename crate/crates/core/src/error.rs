use thiserror::Error;

/// Errors raised by the codebook, channel, detector and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("invalid partition policy: {0}")]
    InvalidPolicy(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} size {size} exceeds the cap of {cap}{hint}")]
    SizeLimit {
        what: &'static str,
        size: u128,
        cap: u128,
        hint: &'static str,
    },

    #[error("matrix is not Hermitian (asymmetry {0:e})")]
    NonHermitian(f64),

    #[error("matrix has a negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("eigen-solver did not converge after {0} rotations")]
    NoConvergence(usize),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("detector misuse: {0}")]
    Misuse(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("simulation requires at least one trial")]
    ZeroTrials,

    #[error("misordered SNR bracket: {0}")]
    Bracket(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
