use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("curved-array root solve failed at rho = {rho:.6} (residual {residual:.3e})")]
    SurfaceNotFound { rho: f64, residual: f64 },

    #[error("diffraction order at grazing incidence (|q - g| = k0)")]
    GrazingOrder,

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("eigensolver failed to converge (matrix digest {digest:016x})")]
    EigenFailed { digest: u64 },

    #[error("two-excitation sector too large: {atoms} atoms exceeds cap {cap}")]
    DimensionTooLarge { atoms: usize, cap: usize },

    #[error("did not converge: {0}")]
    NotConverged(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
