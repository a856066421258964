use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A weight family or element parameter violates one of its invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("deformation parameter t = {0} outside (0, 1]")]
    Domain(f64),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The requested tail tolerance needs more indices than the cap allows.
    #[error("window for t = {t} needs {needed} indices, cap is {cap}")]
    WindowTooLarge { t: f64, needed: u64, cap: u64 },

    #[error("kernel band {n} exceeds the product length cap of {cap}")]
    KernelTooLong { n: usize, cap: usize },

    #[error("quadrature did not converge: estimate {estimate}, error {error}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("coefficient of {band} has no derivative")]
    MissingDerivative { band: String },

    #[error("rate fit needs at least 3 usable points, got {usable}")]
    InsufficientData { usable: usize },
}
