use thiserror::Error;

/// Errors raised by the library.
///
/// Scalar payloads are reported as `f64` regardless of the working precision.
#[derive(Debug, Error)]
pub enum UqError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("query {query:?} lies outside the hull of the basis nodes ({detail})")]
    HullViolation { query: Vec<f64>, detail: String },

    #[error("dual solve did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("evaluation failed at sample {index}: {detail}")]
    Evaluation { index: usize, detail: String },

    #[error("sample {index} could not be evaluated by the basis: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<UqError>,
    },

    #[error(
        "Gram matrix is ill-conditioned (condition estimate {condition:e}); \
         use fewer basis functions or more samples"
    )]
    IllConditionedGram { condition: f64 },

    #[error("moment matrix is numerically rank deficient at degree {degree} (relative pivot {pivot:e})")]
    Conditioning { degree: usize, pivot: f64 },

    #[error("state became non-finite at t = {time}")]
    BlowUp { time: f64 },

    #[error("cannot normalise: {0}")]
    DivisionGuard(String),

    #[error("parse error on line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<UqError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = UqError> = std::result::Result<T, E>;

/// Attaches a description of the failing step to an error.
pub trait Context<T> {
    fn context<F: FnOnce() -> String>(self, what: F) -> Result<T>;
}

impl<T> Context<T> for Result<T> {
    fn context<F: FnOnce() -> String>(self, what: F) -> Result<T> {
        self.map_err(|e| UqError::Context {
            context: what(),
            source: Box::new(e),
        })
    }
}
