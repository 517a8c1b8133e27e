use thiserror::Error;

use crate::elliptic::EllipticSolveReport;
use crate::stepper::StepReport;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("negative face coefficient {value} on axis {axis}, face {index}")]
    NegativeCoefficient { axis: usize, index: usize, value: f64 },
    #[error("norm exponent must be >= 1, got {0}")]
    InvalidExponent(f64),
}

/// A density value left the admissible interval of an entropy model.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("density {value} outside the admissible interval of the {model} entropy{}", index.map(|i| format!(" at cell {i}")).unwrap_or_default())]
pub struct EntropyError {
    pub model: String,
    pub value: f64,
    pub index: Option<usize>,
}

#[derive(Debug, Clone, Error)]
pub enum EllipticError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("right-hand side is not mean-zero (mean {mean:e}, l2 norm {norm:e})")]
    NotMeanZero { mean: f64, norm: f64 },
    #[error("face coefficient {value} on axis {axis}, face {index} is not strictly positive")]
    NonPositiveCoefficient { axis: usize, index: usize, value: f64 },
    #[error("conjugate gradient did not converge: {0:?}")]
    NotConverged(EllipticSolveReport),
}

#[derive(Debug, Clone, Error)]
pub enum StepError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("invalid scheme parameters: {0}")]
    InvalidParams(String),
    #[error("inadmissible initial data: {0}")]
    InvalidInitialData(String),
    #[error("density solve did not converge: {0:?}")]
    NonConvergence(StepReport),
    #[error("no admissible step could be found (time step too large for the solver): {0:?}")]
    PositivityBreakdown(StepReport),
}
