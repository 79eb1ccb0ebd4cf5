//! trackforge: online speaker tracking over embedding streams.
//!
//! The pipeline segments a recording with an oracle VAD, averages enrollment
//! embeddings into per-speaker models, labels each segment online with a
//! small convolutional scorer (or a two-covariance PLDA / cosine baseline),
//! post-processes the label stream, and evaluates with DER, EER and minDCF.
//! A seeded simulator generates embedding streams that mimic i-vector
//! behavior, so the whole pipeline runs self-contained.
//!
//! All numeric code is generic over [`scalar::Scalar`] (f32 or f64); the
//! aliases below fix the f64 instantiation used by the CLI.

pub mod augment;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod kv;
mod linalg;
pub mod metrics;
pub mod modelgen;
pub mod net;
pub mod plda;
pub mod rng;
pub mod rttm;
pub mod scalar;
pub mod segmenter;
pub mod simulator;
pub mod timeline;
pub mod tracker;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// f64 instantiations used by the CLI and experiment harness.
pub type EmbeddingSegment64 = embedding::EmbeddingSegment<f64>;
pub type SpeakerModel64 = embedding::SpeakerModel<f64>;
pub type ModelBank64 = embedding::ModelBank<f64>;
pub type LabeledSegment64 = embedding::LabeledSegment<f64>;
pub type NetworkParams64 = net::NetworkParams<f64>;
pub type PldaModel64 = plda::PldaModel<f64>;
pub type TrialScore64 = metrics::TrialScore<f64>;
pub type SimulatedRecording64 = simulator::SimulatedRecording<f64>;
