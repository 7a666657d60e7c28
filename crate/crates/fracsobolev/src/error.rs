use thiserror::Error;

/// Errors surfaced by grid construction, kernel evaluation and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A grid point is not inside any of the delta-balls of a covering.
    #[error("coverage error: grid point {index} at {coords:?} is not within delta of any center")]
    Coverage { index: usize, coords: Vec<f64> },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    /// Armijo line search exhausted its halvings before the stopping
    /// criteria were met. The trace of accepted iterates is attached.
    #[error("stagnation after {iterations} iterations: line search failed 60 halvings")]
    Stagnation {
        iterations: usize,
        trace: Vec<(usize, f64, f64)>,
    },

    /// A continuation stage failed; the stages completed so far are attached.
    #[error("continuation aborted at q = {failed_q}: {message}")]
    Continuation {
        failed_q: f64,
        message: String,
        completed: Vec<(f64, f64)>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
