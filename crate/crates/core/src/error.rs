//! Error type shared by every module of the crate.

use num_complex::Complex64;
use thiserror::Error;

/// Failures raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("lattice size N = {0} is below the minimum of 3")]
    LatticeTooSmall(usize),

    #[error("state is not even: max |q_n - q_(N-n)| = {residual:e}")]
    NotEven { residual: f64 },

    #[error("state has {got} entries but the lattice has N = {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("vartheta denominator and numerator both vanish at a = {a}, N = {n}")]
    DegenerateDenominator { a: f64, n: usize },

    #[error("block mode system is singular (sin or cos of vartheta vanishes)")]
    SingularModeSystem,

    #[error("cosine mode 0 carrier amplitude is zero")]
    ZeroCarrier,

    #[error("spectral parameter z must be nonzero")]
    ZeroSpectralParameter,

    #[error("Newton iteration did not converge from seed {seed} after {iterations} iterations")]
    NoConvergence { seed: Complex64, iterations: usize },

    #[error("second derivative of the discriminant is degenerate at z = {0}")]
    DegenerateHessian(Complex64),

    #[error("z = {0} is not a simple critical point")]
    NotSimpleCritical(Complex64),

    #[error("branch of sqrt(rho cos^2 beta - 1) is ambiguous at z = {0}")]
    BranchAmbiguity(Complex64),

    #[error("eigenfunction vanishes at site {0}")]
    ZeroEigenfunction(usize),

    #[error("eigenfunction residual {residual:e} exceeds {limit:e}")]
    EigenfunctionResidualTooLarge { residual: f64, limit: f64 },

    #[error("denominator Lambda_n vanishes at site {0}")]
    PoleInLambda(usize),

    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),

    #[error("f1 = {f1:e} is too small to define kappa")]
    DegenerateF1 { f1: f64 },

    #[error("Melnikov function has no sign change over gamma in [0, 2pi)")]
    NoRoot,

    #[error("root at gamma = {gamma0} is degenerate: |dM/dgamma| = {derivative:e}")]
    DegenerateRoot { gamma0: f64, derivative: f64 },

    #[error("modulus must be positive (got {0})")]
    ZeroModulus(f64),

    #[error("omega + eta y = {0} is not positive")]
    NegativeModulus(f64),

    #[error("|alpha1 / (4 alpha2 omega)| = {ratio} is within delta0 of 1")]
    BoundaryCase { ratio: f64 },

    #[error("fixed point continuation failed at eta = {eta}")]
    ContinuationFailure { eta: f64 },

    #[error("fixed point kind is indeterminate: det = {det:e}")]
    IndeterminateKind { det: f64 },

    #[error("no saddle point available for separatrix tracing")]
    NoSaddle,

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("distances span only {decades:.2} decades, need at least 2")]
    InsufficientDecade { decades: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
