use std::io;

use thiserror::Error;

/// Errors produced by the core algorithms and file codecs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("zero vector is not allowed here")]
    ZeroVector,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unsupported sample rate {actual} Hz (expected {expected} Hz)")]
    SampleRate { expected: u32, actual: u32 },

    #[error("not enough {gender} candidates in pool: need {needed}, have {available}")]
    InsufficientCandidates {
        gender: crate::pool::Gender,
        needed: usize,
        available: usize,
    },

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("trial set needs at least one target and one nontarget score")]
    SingleClass,

    #[error("target index {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },

    #[error("scenario {0} requires an anonymizer")]
    MissingAnonymizer(crate::eval::Scenario),

    #[error("polynomial root finding did not converge (residual {0:e})")]
    RootFinding(f64),

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid WAV data")]
    Wav(#[from] hound::Error),

    #[error("invalid JSON")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
