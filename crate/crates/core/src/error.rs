use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("critical point at y = {y:.6} is degenerate: |U''| = {u2:.3e} < {tol:.1e}")]
    DegenerateCritical { y: f64, u2: f64, tol: f64 },

    #[error("profile table is not periodic: |U(2π) - U(0)| = {mismatch:.3e} exceeds 1e-10")]
    NonPeriodic { mismatch: f64 },

    #[error("profile table is malformed: {0}")]
    BadTable(String),

    #[error("profile has no critical points")]
    NoCriticalPoints,

    #[error("finite-difference step {h:.3e} exceeds resolution limit {limit:.3e}")]
    GridTooCoarse { h: f64, limit: f64 },

    #[error("grid size {0} must be a power of two and at least 16")]
    BadGridSize(usize),

    #[error("mode k = 0 carries no shear; reduction undefined")]
    ZeroMode,

    #[error("spectral tail fraction {fraction:.3e} at t = {t:.4} exceeds {tol:.1e}; grid too coarse for this run")]
    Aliasing { t: f64, fraction: f64, tol: f64 },

    #[error("bump width {width:.3e} below resolution floor {min:.3e} (4 grid cells)")]
    UnresolvedBump { width: f64, min: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("functional/comparison ratio {ratio:.6} outside [1/2, 3/2] at t = {t:.4}")]
    EquivalenceViolation { ratio: f64, t: f64 },

    #[error("output stride {stride:.4} exceeds 10·dt = {limit:.4}; differences too coarse to audit")]
    StrideTooCoarse { stride: f64, limit: f64 },

    #[error("functional is non-positive ({phi:.3e}) at t = {t:.4}")]
    NegativePhi { t: f64, phi: f64 },

    #[error("no beta in the trial grid down to 2^-20 passes the audit")]
    NoFeasibleBeta,

    #[error("quantity underflowed below 1e-280 inside the fit window")]
    Underflow,

    #[error("need at least {need} points spanning {decades} decades of nu, got {got}")]
    InsufficientPoints { need: usize, decades: f64, got: usize },

    #[error("pencil is not positive semidefinite even at c = 2^20")]
    Unbounded,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
