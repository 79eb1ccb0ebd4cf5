//! Two-covariance PLDA baseline and cosine scoring.
//!
//! The generative model: speaker means are Gaussian with covariance B around
//! a global mean, observations Gaussian with covariance W around the speaker
//! mean. Scoring a pair of embeddings compares the joint likelihood under a
//! shared speaker mean against independent speakers:
//! same-speaker joint covariance [[B+W, B], [B, B+W]], different-speaker
//! [[B+W, 0], [0, B+W]], both centered at the stacked global mean.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::embedding::{EmbeddingSegment, LabeledSegment, ModelBank};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_logdet, cholesky_solve, jacobi_eigen, reconstruct_from_eigen};
use crate::scalar::Scalar;
use crate::timeline::SpeakerId;
use crate::tracker::{track_stream, SegmentScorer, TrackerConfig, TrackingMode};

/// Fitted two-covariance model with precomputed scoring factorizations.
#[derive(Debug, Clone)]
pub struct PldaModel<F: Scalar> {
    mean: Vec<F>,
    between: Vec<F>,
    within: Vec<F>,
    dim: usize,
    chol_same: Vec<F>,
    chol_diff: Vec<F>,
    logdet_same: F,
    logdet_diff: F,
}

impl<F: Scalar> PldaModel<F> {
    /// Assemble a model from its parameters; factorizes the joint
    /// covariances once so scoring is two triangular solves.
    pub fn new(mean: Vec<F>, between: Vec<F>, within: Vec<F>) -> Result<Self> {
        let dim = mean.len();
        if between.len() != dim * dim || within.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: between.len().max(within.len()),
                context: "PLDA covariance".into(),
            });
        }
        let n2 = 2 * dim;
        let mut sigma_same = vec![F::zero(); n2 * n2];
        let mut sigma_diff = vec![F::zero(); n2 * n2];
        for i in 0..dim {
            for j in 0..dim {
                let total = between[i * dim + j] + within[i * dim + j];
                sigma_same[i * n2 + j] = total;
                sigma_same[(i + dim) * n2 + (j + dim)] = total;
                sigma_same[i * n2 + (j + dim)] = between[i * dim + j];
                sigma_same[(i + dim) * n2 + j] = between[i * dim + j];
                sigma_diff[i * n2 + j] = total;
                sigma_diff[(i + dim) * n2 + (j + dim)] = total;
            }
        }
        let chol_same = cholesky(&sigma_same, n2)?;
        let chol_diff = cholesky(&sigma_diff, n2)?;
        let logdet_same = cholesky_logdet(&chol_same, n2);
        let logdet_diff = cholesky_logdet(&chol_diff, n2);
        Ok(PldaModel {
            mean,
            between,
            within,
            dim,
            chol_same,
            chol_diff,
            logdet_same,
            logdet_diff,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &[F] {
        &self.mean
    }

    pub fn between(&self) -> &[F] {
        &self.between
    }

    pub fn within(&self) -> &[F] {
        &self.within
    }

    /// Log-likelihood ratio that the two embeddings share a speaker.
    pub fn score_llr(&self, e1: &[F], e2: &[F]) -> Result<F> {
        if e1.len() != self.dim || e2.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: e1.len().max(e2.len()),
                context: "PLDA scoring".into(),
            });
        }
        let n2 = 2 * self.dim;
        let mut x = Vec::with_capacity(n2);
        for (v, m) in e1.iter().zip(&self.mean) {
            x.push(*v - *m);
        }
        for (v, m) in e2.iter().zip(&self.mean) {
            x.push(*v - *m);
        }
        let qf = |chol: &[F]| {
            let solved = cholesky_solve(chol, n2, &x);
            let mut acc = F::zero();
            for (a, b) in x.iter().zip(&solved) {
                acc += *a * *b;
            }
            acc
        };
        let qf_same = qf(&self.chol_same);
        let qf_diff = qf(&self.chol_diff);
        let half = F::from_f64_lossy(0.5);
        Ok(-half * (qf_same - qf_diff + self.logdet_same - self.logdet_diff))
    }
}

/// Plug-in maximum-likelihood fit: global mean, covariance of per-speaker
/// means, pooled within-speaker covariance. W is eigenvalue-floored so it is
/// always positive definite.
pub fn fit_plda<F: Scalar>(data: &BTreeMap<SpeakerId, Vec<Vec<F>>>) -> Result<PldaModel<F>> {
    if data.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "PLDA needs at least 2 speakers, got {}",
            data.len()
        )));
    }
    for (speaker, vectors) in data {
        if vectors.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "speaker {speaker} has {} vector(s), need at least 2",
                vectors.len()
            )));
        }
    }
    let dim = data.values().next().unwrap()[0].len();
    for vectors in data.values() {
        for v in vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                    context: "PLDA training vector".into(),
                });
            }
        }
    }

    let total: usize = data.values().map(Vec::len).sum();
    let mut mean = vec![F::zero(); dim];
    for vectors in data.values() {
        for v in vectors {
            for (acc, x) in mean.iter_mut().zip(v) {
                *acc += *x;
            }
        }
    }
    let inv_total = F::one() / F::from_f64_lossy(total as f64);
    mean.iter_mut().for_each(|m| *m *= inv_total);

    let mut between = vec![F::zero(); dim * dim];
    let mut within = vec![F::zero(); dim * dim];
    for vectors in data.values() {
        let inv_n = F::one() / F::from_f64_lossy(vectors.len() as f64);
        let mut class_mean = vec![F::zero(); dim];
        for v in vectors {
            for (acc, x) in class_mean.iter_mut().zip(v) {
                *acc += *x;
            }
        }
        class_mean.iter_mut().for_each(|m| *m *= inv_n);
        for i in 0..dim {
            let di = class_mean[i] - mean[i];
            for j in 0..dim {
                between[i * dim + j] += di * (class_mean[j] - mean[j]);
            }
        }
        for v in vectors {
            for i in 0..dim {
                let di = v[i] - class_mean[i];
                for j in 0..dim {
                    within[i * dim + j] += di * (v[j] - class_mean[j]);
                }
            }
        }
    }
    let inv_k = F::one() / F::from_f64_lossy(data.len() as f64);
    between.iter_mut().for_each(|x| *x *= inv_k);
    within.iter_mut().for_each(|x| *x *= inv_total);

    // Floor the within-covariance spectrum: relative to its mean eigenvalue,
    // with a small absolute fallback for degenerate data.
    let trace: F = (0..dim).map(|i| within[i * dim + i]).fold(F::zero(), |a, b| a + b);
    let rel = F::from_f64_lossy(1e-8) * trace / F::from_f64_lossy(dim as f64);
    let floor = rel.max(F::from_f64_lossy(1e-8));
    let (mut values, vectors) = jacobi_eigen(&within, dim);
    for v in &mut values {
        *v = v.max(floor);
    }
    let within = reconstruct_from_eigen(&values, &vectors, dim);

    PldaModel::new(mean, between, within)
}

/// Cosine similarity; rejects zero vectors.
pub fn cosine_score<F: Scalar>(e1: &[F], e2: &[F]) -> Result<F> {
    if e1.len() != e2.len() {
        return Err(Error::DimensionMismatch {
            expected: e1.len(),
            got: e2.len(),
            context: "cosine scoring".into(),
        });
    }
    let mut dot = F::zero();
    let mut n1 = F::zero();
    let mut n2 = F::zero();
    for (a, b) in e1.iter().zip(e2) {
        dot += *a * *b;
        n1 += *a * *a;
        n2 += *b * *b;
    }
    if n1 == F::zero() || n2 == F::zero() {
        return Err(Error::InvalidArgument("cosine of a zero vector".into()));
    }
    Ok(dot / (n1.sqrt() * n2.sqrt()))
}

impl<F: Scalar> SegmentScorer<F> for PldaModel<F> {
    fn score(&self, segment: &EmbeddingSegment<F>, bank: &ModelBank<F>) -> Result<Vec<F>> {
        bank.models()
            .iter()
            .map(|m| self.score_llr(&segment.vector, &m.vector))
            .collect()
    }
}

/// Cosine baseline scorer.
#[derive(Debug, Clone, Copy, Default)]
pub struct CosineScorer;

impl<F: Scalar> SegmentScorer<F> for CosineScorer {
    fn score(&self, segment: &EmbeddingSegment<F>, bank: &ModelBank<F>) -> Result<Vec<F>> {
        bank.models()
            .iter()
            .map(|m| cosine_score(&segment.vector, &m.vector))
            .collect()
    }
}

/// Track a stream with PLDA scores; in verify mode `threshold_llr` gates the
/// argmax LLR.
pub fn plda_track<F: Scalar>(
    model: &PldaModel<F>,
    bank: &ModelBank<F>,
    stream: &[EmbeddingSegment<F>],
    mode: TrackingMode,
    threshold_llr: f64,
    smoothing: bool,
) -> Result<Vec<LabeledSegment<F>>> {
    let cfg = TrackerConfig {
        mode,
        threshold: threshold_llr,
        smoothing,
    };
    track_stream(model, bank, stream, &cfg)
}

/// PLDA checkpoint:
///
/// ```text
/// trackforge-plda v1 b=<b>
/// <mean...>
/// <B row-major...>
/// <W row-major...>
/// ```
pub fn save_plda<F: Scalar>(writer: impl Write, model: &PldaModel<F>) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "trackforge-plda v1 b={}", model.dim)?;
    for row in [&model.mean, &model.between, &model.within] {
        let mut first = true;
        for v in row.iter() {
            if first {
                write!(w, "{v}")?;
                first = false;
            } else {
                write!(w, " {v}")?;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_plda_path<F: Scalar>(path: impl AsRef<Path>, model: &PldaModel<F>) -> Result<()> {
    save_plda(std::fs::File::create(path)?, model)
}

pub fn load_plda<F: Scalar>(reader: impl Read) -> Result<PldaModel<F>> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty PLDA checkpoint".into()))??;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("trackforge-plda") || tokens.next() != Some("v1") {
        return Err(Error::Checkpoint("not a trackforge-plda v1 checkpoint".into()));
    }
    let b: usize = tokens
        .next()
        .and_then(|t| t.strip_prefix("b="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Checkpoint("bad b= field".into()))?;

    let mut read_row = |expected: usize, what: &str| -> Result<Vec<F>> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("missing {what}")))??;
        let row: Vec<F> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<F>()
                    .map_err(|_| Error::Checkpoint(format!("bad float {t:?} in {what}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != expected {
            return Err(Error::Checkpoint(format!(
                "{what} expects {expected} values, got {}",
                row.len()
            )));
        }
        Ok(row)
    };
    let mean = read_row(b, "mean")?;
    let between = read_row(b * b, "between covariance")?;
    let within = read_row(b * b, "within covariance")?;
    PldaModel::new(mean, between, within)
}

pub fn load_plda_path<F: Scalar>(path: impl AsRef<Path>) -> Result<PldaModel<F>> {
    load_plda(std::fs::File::open(path)?)
}
