use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid kernel parameters: {0}")]
    InvalidKernel(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid quadrature configuration: {0}")]
    InvalidQuadConfig(String),

    #[error("cross-section prefactor ω₁^(β-1/2) is singular at ω₁ = 0 for β = {beta}")]
    SingularPrefactor { beta: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("scaling fit rejected: {0}")]
    Fit(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("diagnostic failure: {0}")]
    Diagnostic(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidKernel(_) => "invalid_kernel",
            Error::InvalidProfile(_) => "invalid_profile",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidQuadConfig(_) => "invalid_quad_config",
            Error::SingularPrefactor { .. } => "singular_prefactor",
            Error::InvalidDomain(_) => "invalid_domain",
            Error::Fit(_) => "fit",
            Error::OutOfRange(_) => "out_of_range",
            Error::Diagnostic(_) => "diagnostic",
        }
    }
}
