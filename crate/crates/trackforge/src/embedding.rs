//! Embedding-domain value types: segments, speaker models, model banks and
//! labeled tracking output.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::timeline::{SpeakerId, TimeInterval, TIME_EPS};

/// A fixed-length embedding tied to a time interval, with the set of speakers
/// actually active in it (empty for non-target-only content).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSegment<F: Scalar> {
    pub index: usize,
    pub interval: TimeInterval,
    pub vector: Vec<F>,
    pub truth: BTreeSet<SpeakerId>,
}

impl<F: Scalar> EmbeddingSegment<F> {
    pub fn new(
        index: usize,
        interval: TimeInterval,
        vector: Vec<F>,
        truth: BTreeSet<SpeakerId>,
    ) -> Result<Self> {
        if vector.is_empty() || vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "segment vector must be non-empty and finite".into(),
            ));
        }
        Ok(EmbeddingSegment {
            index,
            interval,
            vector,
            truth,
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Validate a per-recording stream: consistent dimension, indices strictly
/// increasing with interval start, minimum segment duration.
pub fn validate_stream<F: Scalar>(
    segments: &[EmbeddingSegment<F>],
    dim: usize,
    min_length: f64,
) -> Result<()> {
    for seg in segments {
        if seg.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: seg.dim(),
                context: format!("segment {}", seg.index),
            });
        }
        if seg.interval.duration() < min_length - TIME_EPS {
            return Err(Error::InvalidArgument(format!(
                "segment {} shorter than {min_length} s",
                seg.index
            )));
        }
    }
    for pair in segments.windows(2) {
        if pair[1].index <= pair[0].index
            || pair[1].interval.start() < pair[0].interval.start() - TIME_EPS
        {
            return Err(Error::InvalidArgument(format!(
                "segments out of order at index {}",
                pair[1].index
            )));
        }
    }
    Ok(())
}

/// An enrolled speaker model: the average of embedding segments observed in
/// the enrollment window.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerModel<F: Scalar> {
    pub speaker: SpeakerId,
    pub vector: Vec<F>,
    pub source_count: usize,
    pub window: TimeInterval,
}

impl<F: Scalar> SpeakerModel<F> {
    pub fn new(
        speaker: SpeakerId,
        vector: Vec<F>,
        source_count: usize,
        window: TimeInterval,
    ) -> Result<Self> {
        if vector.is_empty() || vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "model vector must be non-empty and finite".into(),
            ));
        }
        if source_count == 0 {
            return Err(Error::InvalidArgument(
                "model source count must be positive".into(),
            ));
        }
        Ok(SpeakerModel {
            speaker,
            vector,
            source_count,
            window,
        })
    }
}

/// Ordered sequence of enrolled speaker models; order is enrollment order and
/// defines the score index of each speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBank<F: Scalar> {
    models: Vec<SpeakerModel<F>>,
}

impl<F: Scalar> ModelBank<F> {
    pub fn new(models: Vec<SpeakerModel<F>>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidArgument("model bank must be non-empty".into()));
        }
        let dim = models[0].vector.len();
        for m in &models {
            if m.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.vector.len(),
                    context: format!("model {}", m.speaker),
                });
            }
        }
        let mut ids = BTreeSet::new();
        for m in &models {
            if !ids.insert(m.speaker.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate speaker {} in model bank",
                    m.speaker
                )));
            }
        }
        Ok(ModelBank { models })
    }

    pub fn models(&self) -> &[SpeakerModel<F>] {
        &self.models
    }

    /// Number of tracked speakers.
    pub fn size(&self) -> usize {
        self.models.len()
    }

    pub fn dim(&self) -> usize {
        self.models[0].vector.len()
    }

    pub fn speaker(&self, slot: usize) -> &SpeakerId {
        &self.models[slot].speaker
    }

    pub fn contains(&self, speaker: &SpeakerId) -> bool {
        self.models.iter().any(|m| &m.speaker == speaker)
    }
}

/// Tracking label of a segment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Speaker(SpeakerId),
    Unknown,
}

impl Label {
    pub fn as_speaker(&self) -> Option<&SpeakerId> {
        match self {
            Label::Speaker(s) => Some(s),
            Label::Unknown => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Speaker(s) => write!(f, "{s}"),
            Label::Unknown => write!(f, "UNK"),
        }
    }
}

/// One tracked segment: the decision plus the raw per-model scores that
/// produced it (probabilities for the network, log-likelihood ratios for the
/// PLDA path).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment<F: Scalar> {
    pub segment_index: usize,
    pub interval: TimeInterval,
    pub label: Label,
    pub scores: Vec<F>,
}
