use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("non-finite entry encountered in {0}")]
    NonFinite(&'static str),

    #[error("singular value or symmetric eigenvalue solver did not converge")]
    EigenSolverFailure,

    #[error("theta denominator {denominator:e} is degenerate for |z - z'|^2 = {distance_sq:e}")]
    DegenerateDenominator { denominator: f64, distance_sq: f64 },

    #[error("constraint Jacobian W W^T is rank deficient (the constraint set is incomplete)")]
    RankDeficientW,

    #[error("gradient vanishes at the evaluation point (norm {0:e})")]
    VanishingGradient(f64),

    #[error("dissipation rate <A^+ f, grad V> vanishes at the evaluation point ({0:e})")]
    VanishingDissipation(f64),

    #[error("Newton iteration did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("Newton Jacobian is singular")]
    SingularJacobian,

    #[error("nonlinear system is underdetermined: null-space components of A are unconstrained")]
    UnderdeterminedSystem,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("scheme `{scheme}` is not applicable to problem `{problem}`")]
    IncompatibleScheme { scheme: String, problem: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
