//! Enrollment: build speaker models by averaging the pure segments that
//! intersect each target's model-time window.

use crate::embedding::{EmbeddingSegment, ModelBank, SpeakerModel};
use crate::error::{Error, Result};
use crate::scalar::{mean_vector, Scalar};
use crate::timeline::{
    interval_intersection, ReferenceAnnotation, SpeakerId, TimeInterval, TIME_EPS,
};

/// Enrollment window width in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelTime(f64);

impl ModelTime {
    pub fn new(seconds: f64) -> Result<Self> {
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "model time must be positive, got {seconds}"
            )));
        }
        Ok(ModelTime(seconds))
    }

    pub fn seconds(&self) -> f64 {
        self.0
    }
}

/// Start of the speaker's earliest reference entry.
pub fn enrollment_start(annotation: &ReferenceAnnotation, speaker: &SpeakerId) -> Result<f64> {
    annotation
        .entries()
        .iter()
        .filter(|e| &e.speaker == speaker)
        .map(|e| e.interval.start())
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::UnknownSpeaker(speaker.clone()))
}

/// Average every pure segment of `speaker` that intersects the window
/// `[enrollment_start, enrollment_start + model_time)`. A segment is pure
/// when its truth set is exactly `{speaker}`.
pub fn build_model<F: Scalar>(
    stream: &[EmbeddingSegment<F>],
    annotation: &ReferenceAnnotation,
    speaker: &SpeakerId,
    model_time: ModelTime,
) -> Result<SpeakerModel<F>> {
    let start = enrollment_start(annotation, speaker)?;
    let window = TimeInterval::new(start, start + model_time.seconds())?;
    let eligible: Vec<&[F]> = stream
        .iter()
        .filter(|seg| {
            interval_intersection(seg.interval, window) > TIME_EPS
                && seg.truth.len() == 1
                && seg.truth.contains(speaker)
        })
        .map(|seg| seg.vector.as_slice())
        .collect();
    if eligible.is_empty() {
        return Err(Error::InsufficientEnrollment {
            speaker: speaker.clone(),
            start: window.start(),
            end: window.end(),
        });
    }
    let count = eligible.len();
    SpeakerModel::new(speaker.clone(), mean_vector(&eligible), count, window)
}

/// Build the bank for the given targets, in the given (enrollment) order.
pub fn build_bank<F: Scalar>(
    stream: &[EmbeddingSegment<F>],
    annotation: &ReferenceAnnotation,
    targets: &[SpeakerId],
    model_time: ModelTime,
) -> Result<ModelBank<F>> {
    let models: Vec<SpeakerModel<F>> = targets
        .iter()
        .map(|speaker| build_model(stream, annotation, speaker, model_time))
        .collect::<Result<_>>()?;
    ModelBank::new(models)
}
