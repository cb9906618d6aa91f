use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Packet support (center +/- 6 sigma) sticks out of the named axis.
    #[error("packet does not fit on axis {axis}: {detail}")]
    PacketOutOfBounds { axis: usize, detail: String },

    #[error("cannot normalize a zero-norm field")]
    ZeroNorm,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Non-finite amplitudes appeared; `term` names the Hamiltonian term
    /// whose application produced them.
    #[error("numerical failure in {term}: non-finite amplitudes")]
    NumericalFailure { term: String },

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("scenario aborted: {0}")]
    ScenarioAborted(String),
}

pub type Result<T> = std::result::Result<T, Error>;
