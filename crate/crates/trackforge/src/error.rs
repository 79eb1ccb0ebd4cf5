use thiserror::Error;

use crate::timeline::SpeakerId;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown speaker: {0}")]
    UnknownSpeaker(SpeakerId),

    #[error("insufficient enrollment for speaker {speaker} in window [{start:.3}, {end:.3})")]
    InsufficientEnrollment {
        speaker: SpeakerId,
        start: f64,
        end: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient trials: {0}")]
    InsufficientTrials(String),

    #[error("insufficient speakers: {0}")]
    InsufficientSpeakers(String),

    #[error("diarization error rate undefined: {0}")]
    UndefinedDer(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
