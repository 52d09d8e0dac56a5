use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("configuration too large: {what} exceeds cap {cap}")]
    TooLarge { what: String, cap: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("inconclusive integral ({what}): tail bound {tail:e} exceeds tolerance {tol:e}")]
    InconclusiveIntegral { what: String, tail: f64, tol: f64 },

    #[error("gamma pole: (d+1)/2 - sigma = {re}{im:+}i is within 1e-8 of a nonpositive integer")]
    GammaPole { re: f64, im: f64 },

    #[error("no critical point: |A|/|t| = {ratio} >= 1")]
    NoCriticalPoint { ratio: f64 },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("picard iteration diverged after {iterations} iterations (data norm {data_norm:e})")]
    Divergence { iterations: usize, data_norm: f64 },
}

impl Error {
    /// True for errors caused by a quadrature or truncation that could not be certified.
    pub fn is_inconclusive(&self) -> bool {
        matches!(self, Error::InconclusiveIntegral { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
