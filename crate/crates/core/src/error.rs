use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel is not defined at t = {0} (fractional kernels need t > 0)")]
    KernelDomain(f64),

    #[error("recursion depth {depth} exceeds the brute-force cap {cap}; use g_l_fast")]
    DepthCapExceeded { depth: usize, cap: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("negative spot {0} fed to a scheme step")]
    NegativeSpot(f64),

    #[error("ODE solver failed: {0}")]
    OdeFailure(String),

    #[error("Fourier integral did not converge: {0}")]
    IntegralFailure(String),

    #[error("configuration error: {0}")]
    Config(String),
}
