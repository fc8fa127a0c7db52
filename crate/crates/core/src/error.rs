//! Error type shared across the laboratory.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An item index fell outside the instance's `0..m` range.
    #[error("item index {index} out of range for m = {m}")]
    ItemOutOfRange { index: usize, m: usize },

    /// A constructor or operation received parameters violating its contract.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// An enumeration exceeded its declared budget.
    #[error("resource budget exceeded: {0}")]
    Resource(String),

    /// A mechanism was asked to run on a valuation class it does not support.
    #[error("unsupported valuation class: {0}")]
    UnsupportedValuation(String),

    /// Menu extraction observed the same bundle at two different prices,
    /// which a truthful mechanism can never produce.
    #[error("taxation principle violated: bundle {bundle:?} priced both {first} and {second}")]
    TaxationViolation {
        bundle: Vec<u16>,
        first: String,
        second: String,
    },

    /// Malformed serialized data.
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
