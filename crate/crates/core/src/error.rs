use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("power spectral density is singular at ω = {omega} rad/s")]
    SingularPsd { omega: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("spectrum is not integrable near the band edge ω = {edge:.6e} rad/s ({reason})")]
    Synthesis { edge: f64, reason: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("Fock cutoff {cutoff} leaves tail mass {tail:.3e} above 1e-12")]
    Cutoff { cutoff: usize, tail: f64 },

    #[error("no interior maximum of the sideband coupling in n̄ ∈ [{lo}, {hi}]")]
    Search { lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for failures that stem from the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature(_) | Error::Fit(_) | Error::Search { .. }
        )
    }
}
