use thiserror::Error;

/// Errors raised by the solvers, the stability analysis and the artifact store.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} is not a power of two >= 4")]
    InvalidGridSize(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("linearized operator is near-singular: MINRES stagnated at relative residual {residual:.3e}")]
    SingularJacobian { residual: f64 },

    #[error("fold point: even-subspace solve stagnated at relative residual {residual:.3e}")]
    FoldPoint { residual: f64 },

    #[error("continuation step failed at s = {s}; last accepted s = {last_good}")]
    StepFailure { s: f64, last_good: f64 },

    #[error("branch index {index} needs two neighbours on each side (branch has {len} points)")]
    BoundaryPoint { index: usize, len: usize },

    #[error("solvability condition violated in {what}: defect {defect:.3e}")]
    SolvabilityViolation { what: &'static str, defect: f64 },

    #[error("degenerate extremum: |P''(c0)| = {p2:.3e}")]
    DegenerateExtremum { p2: f64 },

    #[error("{what}: Krylov iteration failed at relative residual {residual:.3e}")]
    IterationFailure { what: &'static str, residual: f64 },

    #[error("Arnoldi iteration broke down: {0}")]
    ArnoldiBreakdown(String),

    #[error("shift-invert inner solve failed at relative residual {residual:.3e}")]
    InnerSolveFailure { residual: f64 },

    #[error("checksum mismatch: expected {expected}, found {found}")]
    ChecksumMismatch { expected: String, found: String },

    #[error("unsupported format version {0}")]
    VersionUnsupported(u32),

    #[error("invariant violated on load: {0}")]
    InvariantViolation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("steepness not strictly increasing at line {line}")]
    MonotonicityViolation { line: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
