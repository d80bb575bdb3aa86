use alloc::string::String;

/// Errors produced by the simulation and optimization layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unsupported parity sector p = {0}; only p = 1 is simulated")]
    UnsupportedParity(u8),
    #[error("unsupported transverse field h = {0}; the initial state needs h < 0")]
    UnsupportedField(f64),
    #[error("interpolation parameter s = {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("hermitian eigensolver did not converge")]
    EigensolverFailure,
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("degenerate step: theta_x + theta_z = {0:e}")]
    DegenerateStep(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("system size N = {0} exceeds the exact-diagonalization limit N <= 13")]
    SizeLimit(usize),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
