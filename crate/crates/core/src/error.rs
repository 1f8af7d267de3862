use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parameter violations: {}", .0.join("; "))]
    Params(Vec<String>),

    #[error("shape rejected: {0}")]
    Shape(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("time step {dt} violates the CFL limit; admissible dt <= {admissible}")]
    Cfl { dt: f64, admissible: f64 },

    #[error("level set has an empty zero set (tumor vanished or filled the box)")]
    EmptyZeroSet,

    #[error("interface band reaches the outer guard radius {guard}")]
    BandEscaped { guard: f64 },

    #[error("linear solver stagnated after {iterations} iterations (relative residual {residual:e})")]
    SolverStagnation { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("penalty system is numerically singular at h = {h}: use eps_penalty >= {eps_min:e}")]
    SingularPenalty { h: f64, eps_min: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("maximum principle breach in {species}: value {value} exceeds ceiling {ceiling}")]
    MaxPrinciple { species: &'static str, value: f64, ceiling: f64 },

    #[error("non-finite value in {field} at step {step}")]
    NonFinite { field: String, step: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("wall-clock budget of {budget_s} s exceeded at t = {t}")]
    BudgetExceeded { budget_s: f64, t: f64 },

    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),

    #[error("oracle invariant breached: {0}")]
    OracleInvariant(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Innermost error, skipping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
