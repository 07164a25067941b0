use thiserror::Error;

use crate::train::MetricsRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("column count {cols} is not divisible by 4")]
    BadBlocking { cols: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("mask is not 2:4-valid (block {block} keeps {kept} entries)")]
    InvalidMask { block: usize, kept: usize },

    #[error("masked reference norm is zero")]
    ZeroNorm,

    #[error("2-sparse threshold undefined: z1*z2 = 0")]
    UndefinedThreshold,

    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: usize },

    #[error("training diverged at step {step} (loss {loss})")]
    Diverged {
        step: usize,
        loss: f64,
        history: Vec<MetricsRecord>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Validation-type failures: bad inputs or configuration rather than
    /// numerical breakdown or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::InvalidParam(_)
                | Error::BadBlocking { .. }
                | Error::ShapeMismatch { .. }
                | Error::InvalidMask { .. }
                | Error::Format(_)
                | Error::Config(_)
                | Error::UndefinedThreshold
                | Error::ZeroNorm
        )
    }

    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. } | Error::NonFiniteGradient { .. }
        )
    }
}
