use thiserror::Error;

/// Errors raised by the numerical routines and the batch front-end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("indeterminate point: numerator and denominator both vanish at {0}")]
    Indeterminate(String),

    #[error("numerator and denominator are not coprime (normalized resultant {0:.3e})")]
    NotCoprime(f64),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("coefficient overflow while {0}; iterate by evaluation instead")]
    CoefficientOverflow(String),

    #[error("root iteration did not converge after {iterations} iterations (max residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("not repelling: |lambda| = {0}")]
    NotRepelling(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("exceptional point {point}; exceptional set {set}")]
    Exceptional { point: String, set: String },

    #[error("hyperbolicity hypothesis violated: min |B'| on the circle is {0}")]
    NotExpanding(f64),

    #[error("curve not unique at this bidegree ({m},{n})")]
    CurveNotUnique { m: usize, n: usize },

    #[error("evaluation domain violation at samples {0:?}")]
    Domain(Vec<usize>),

    #[error("too many discarded samples: {discarded} of {total}")]
    TooManyDiscarded { discarded: usize, total: usize },

    #[error("empty window")]
    EmptyWindow,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status for the command-line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidMap(_) | Error::NotCoprime(_) => 2,
            Error::Io(_) | Error::Json(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
