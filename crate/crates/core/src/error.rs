use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("occupation vector has length {got}, model has {expected} modes")]
    OccupationLength { expected: usize, got: usize },

    #[error("level index {n} outside sector range 0..={max}")]
    LevelOutOfRange { n: usize, max: usize },

    #[error("invalid sector: {0}")]
    InvalidSector(String),

    #[error("negative argument {value} under square root in ladder coefficient at level {level}")]
    NegativeSqrtArgument { level: usize, value: f64 },

    #[error("eigensolver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("block cannot be symmetrized: {0}")]
    NotSymmetrizable(String),

    #[error("polynomial degree {degree} exceeds invariant subspace bound {bound}")]
    DegreeOverflow { degree: usize, bound: usize },

    #[error("all-zero coefficient vector has no roots")]
    ZeroPolynomial,

    #[error("roots {i} and {j} are closer than {threshold:e}; use robust residuals")]
    CoincidentRoots { i: usize, j: usize, threshold: f64 },

    #[error("energy has imaginary part {imag:e} above tolerance {tol:e}")]
    ComplexEnergy { imag: f64, tol: f64 },

    #[error("expected {expected} roots, got {got}")]
    RootCount { expected: usize, got: usize },
}
