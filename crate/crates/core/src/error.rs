use thiserror::Error;

/// Errors raised by problem construction, the solvers and the file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("lower bound exceeds upper bound at component {index}: {lower} > {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },

    #[error("point is infeasible at component {index}: {value} not in [{lower}, {upper}]")]
    Infeasible {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("nonpositive curvature {curvature:e} along the {direction} direction")]
    NonpositiveCurvature {
        direction: &'static str,
        curvature: f64,
    },

    #[error("power iteration broke down: the operator annihilated the start vector")]
    NormEstimateBreakdown,

    #[error("equality constraint matrix is rank deficient (rank {rank} < {rows})")]
    RankDeficient { rank: usize, rows: usize },

    #[error("label {0} is not -1 or +1")]
    InvalidLabel(f64),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("dataset must contain exactly two classes, found {0}")]
    ClassCount(usize),

    #[error("unknown expansion strategy `{0}`")]
    UnknownStrategy(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
