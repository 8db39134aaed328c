use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The request is well posed but no closed form is available for it.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A series could not be truncated within the mode cap at the requested tolerance.
    #[error(
        "truncation error: tail bound {achieved:.3e} (relative) exceeds requested {requested:.3e} at {modes} modes"
    )]
    Truncation { achieved: f64, requested: f64, modes: u64 },

    /// Adaptive quadrature did not meet its target.
    #[error("quadrature error: achieved {achieved:.3e}, target {target:.3e}")]
    Quadrature { achieved: f64, target: f64 },

    /// A tail envelope or convexity assumption failed at a checked point.
    #[error("envelope violated: {0}")]
    Envelope(String),

    /// Root finding or minimization could not proceed.
    #[error("solver error: {0}")]
    Solver(String),

    /// Least-squares fit of an asymptotic law failed.
    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
