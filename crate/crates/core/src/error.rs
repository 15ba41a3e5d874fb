use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A prior, policy, or training configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),
    /// A value is outside the domain of a reward model or closed form.
    #[error("domain error: {0}")]
    Domain(String),
    /// Non-finite or malformed input data.
    #[error("input error: {0}")]
    Input(String),
    /// An internal invariant was violated (shape mismatch, unpulled arm, ...).
    #[error("internal invariant violated: {0}")]
    Internal(String),
    /// Gradient ascent produced a non-finite gradient.
    #[error("non-finite gradient at iteration {iteration}: params {params:?}")]
    NonFiniteGradient { iteration: usize, params: Vec<f64> },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
