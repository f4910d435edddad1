use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("expected {expected} expressions, found {found}")]
    Arity { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("point {point:?} lies outside the domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("non-finite value at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget { max_steps: usize, t: f64 },

    #[error("trajectory left the domain at t = {t}, x = {x:?}")]
    LeftDomain { t: f64, x: Vec<f64> },

    #[error("requested time {t} exceeds the horizon {horizon}")]
    Horizon { t: f64, horizon: f64 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("degenerate surface parameterization at τ = {tau:?}")]
    DegenerateSurface { tau: Vec<f64> },

    #[error("surface is not transversal at τ = {tau:?} (⟨n, P⟩ = {value:e})")]
    NotTransversal { tau: Vec<f64>, value: f64 },

    #[error("orbit of {x:?} does not reach the surface within the horizon")]
    NotInOmega { x: Vec<f64> },

    #[error("orbit of {x:?} crosses the surface {} times (at t = {times:?})", times.len())]
    AmbiguousChart { x: Vec<f64>, times: Vec<f64> },

    #[error("orbit of {x:?} crosses the surface outside the parameterized patch (τ = {params:?})")]
    OutsidePatch { x: Vec<f64>, params: Vec<f64> },

    #[error("minimal set is rank deficient at {x:?} (singular values {singular_values:?})")]
    RankDeficient { x: Vec<f64>, singular_values: Vec<f64> },

    #[error("eigenfunction vanishes at the orbit start {x:?}")]
    VanishingEigenfunction { x: Vec<f64> },

    #[error("fit diverged at iteration {iteration}: non-finite loss at node {node}")]
    Divergence { iteration: usize, node: usize },

    #[error("point {point:?} is outside the validity region of `{system}`: {reason}")]
    Excluded {
        system: String,
        point: Vec<f64>,
        reason: &'static str,
    },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}
