use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inner box face at {coord} is not on a grid plane of resolution {n}")]
    GridMisaligned { coord: f64, n: usize },
    #[error("inner box is not strictly inside the outer box")]
    DegenerateBox,
    #[error("face index {0} out of range")]
    UnknownFace(usize),
    #[error("degenerate tetrahedron (signed volume {0:e})")]
    DegenerateTet(f64),
    #[error("degenerate triangle (area {0:e})")]
    DegenerateTriangle(f64),
    #[error("energy Gram is not positive definite (pivot {pivot:e} at row {row})")]
    NonPositiveEnergy { row: usize, pivot: f64 },
    #[error("linear solver breakdown: {0}")]
    SolverBreakdown(String),
    #[error("eigensolver did not converge after {iterations} subspace iterations (worst residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },
    #[error("beta must be nonzero for the z-decomposition")]
    BetaZero,
    #[error("energy identity violated between samples {first} and {second} (relative defect {defect:e})")]
    IdentityViolated { first: usize, second: usize, defect: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid value for `{field}`: {msg}")]
    Validation { field: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
