//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A lookup exceeded what the current prime table holds. The caller can
    /// extend the table and retry.
    #[error(
        "out of range: {what} = {requested} exceeds table capacity {available}; extend the table"
    )]
    OutOfRange {
        what: &'static str,
        requested: u64,
        available: u64,
    },

    /// A configured resource budget (memory, sieve bound, search cap) was hit.
    #[error("resource limit: {0}")]
    Resource(String),

    /// A caller-supplied contract (growth certificate) is missing or invalid.
    #[error("contract error: {0}")]
    Contract(String),

    /// A prime cache file failed validation.
    #[error("cache error: {0}")]
    Cache(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
}
