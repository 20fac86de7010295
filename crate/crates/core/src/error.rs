use thiserror::Error;

use crate::Vector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-finite value at stencil point {point:?}")]
    EvaluationFailure { point: Vec<f64> },

    #[error("step size underflow at t = {t} (last good state {state:?})")]
    Stiffness { t: f64, state: Vec<f64> },

    #[error("no convergence after {iterations} iterations (best value {value:e})")]
    NonConvergence {
        iterations: usize,
        best: Vec<f64>,
        value: f64,
    },

    #[error("iterate diverged to |x| = {norm:e}")]
    Diverged { norm: f64 },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("legendre inversion failed: residual {residual:e} after {iterations} iterations")]
    Inversion { residual: f64, iterations: usize },

    #[error("orthogonal cone search found no root from {seeds} seeds")]
    EmptyCone { seeds: usize },

    #[error("quotient minimizer escaped to fiber infinity")]
    UnboundedFiber,

    #[error("invalid wind: h(W,W) = {norm_sq} is not below 1 - 1e-10{}", at.as_ref().map(|p| format!(" at {p:?}")).unwrap_or_default())]
    InvalidWind { norm_sq: f64, at: Option<Vec<f64>> },

    #[error("invalid one-form: |beta|_a^2 = {norm_sq} is not below 1 - 1e-10")]
    InvalidForm { norm_sq: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("trajectory left the working region at t = {t}")]
    DomainExit { t: f64 },

    #[error("fundamental tensor degenerate at {at:?}")]
    Degeneracy { at: Vec<f64> },

    #[error("target unreachable: no shot converged ({seeds} seeds)")]
    Unreachable { seeds: usize },

    #[error("no orthogonal connector found (seeds tried: {seeds})")]
    SearchFailure { seeds: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("map is not a submersion at {at:?} (rank {rank} < {expected})")]
    NotASubmersion { at: Vec<f64>, rank: usize, expected: usize },

    #[error("induced base metric depends on the fiber point (difference {difference:e})")]
    WellDefinedness { difference: f64 },

    #[error("induced base norm is not of Randers type (fit residual {residual:e})")]
    BaseNotRanders { residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn eval_at(point: &Vector) -> Self {
        Error::EvaluationFailure {
            point: point.iter().copied().collect(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
