use thiserror::Error;

use crate::body::BodyPartLabel;

/// Errors produced by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid depth {0} mm (must be > 0)")]
    InvalidDepth(f64),

    #[error("no pixel in region passes the depth threshold")]
    NoValidDepth,

    #[error("velocity limit table has no entry for {0}")]
    MissingLimit(BodyPartLabel),

    #[error("robot never completed its cycle")]
    IncompleteCycle,

    #[error("scenario did not finish within {0} s of simulated time")]
    Timeout(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
