//! Training-set construction and mini-batch SGD.
//!
//! Every (segment, bank) pair contributes one sample per permutation of the
//! bank order, with targets permuted identically, so scoring cannot depend on
//! the model sequence order. Each permuted sample may additionally spawn a
//! zero-padded variant in which one model channel is replaced by the zero
//! vector and its target forced to 0 — the verification negative.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::embedding::{EmbeddingSegment, ModelBank};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, DOMAIN_DATASET, DOMAIN_SHUFFLE};
use crate::scalar::Scalar;

use super::{accumulate_batch, assemble_input, NetworkGradients, NetworkParams, Workspace};

/// SGD hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Probability that a permuted sample spawns a zero-padded variant.
    pub zero_pad_prob: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 64,
            epochs: 30,
            zero_pad_prob: 0.2,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidArgument("learning rate must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.zero_pad_prob) {
            return Err(Error::InvalidArgument(
                "zero-pad probability must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// One training sample: channel-major input and one 0/1 target per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample<F: Scalar> {
    pub input: Vec<F>,
    pub target: Vec<F>,
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn recurse(remaining: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..remaining.len() {
            let item = remaining.remove(i);
            prefix.push(item);
            recurse(remaining, prefix, out);
            prefix.pop();
            remaining.insert(i, item);
        }
    }
    let mut out = Vec::new();
    recurse(&mut (0..n).collect(), &mut Vec::new(), &mut out);
    out
}

/// Build the permutation- and zero-pad-augmented training set over several
/// recordings. All banks must share the same size and dimension.
pub fn build_training_set<F: Scalar>(
    data: &[(&[EmbeddingSegment<F>], &ModelBank<F>)],
    cfg: &TrainConfig,
) -> Result<Vec<TrainingSample<F>>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("no training recordings".into()));
    }
    let s = data[0].1.size();
    let b = data[0].1.dim();
    for (_, bank) in data {
        if bank.size() != s || bank.dim() != b {
            return Err(Error::InvalidArgument(format!(
                "bank size/dim mismatch across recordings: ({}, {}) vs ({s}, {b})",
                bank.size(),
                bank.dim()
            )));
        }
    }
    if s > 6 {
        return Err(Error::InvalidArgument(
            "permutation augmentation supports at most 6 tracked speakers".into(),
        ));
    }

    let perms = permutations(s);
    let zeros = vec![F::zero(); b];
    let mut rng = stream_rng(cfg.seed, DOMAIN_DATASET, 0);
    let mut out = Vec::new();
    for (stream, bank) in data {
        for segment in *stream {
            if segment.dim() != b {
                return Err(Error::DimensionMismatch {
                    expected: b,
                    got: segment.dim(),
                    context: format!("segment {}", segment.index),
                });
            }
            let base_target: Vec<F> = (0..s)
                .map(|slot| {
                    if segment.truth.contains(bank.speaker(slot)) {
                        F::one()
                    } else {
                        F::zero()
                    }
                })
                .collect();
            for perm in &perms {
                let models: Vec<&[F]> = perm
                    .iter()
                    .map(|&slot| bank.models()[slot].vector.as_slice())
                    .collect();
                let input = assemble_input(&segment.vector, &models)?;
                let target: Vec<F> = perm.iter().map(|&slot| base_target[slot]).collect();
                let sample = TrainingSample { input, target };

                let zero_pad = rng.random_range(0.0..1.0) < cfg.zero_pad_prob;
                let pad_slot = if zero_pad { rng.random_range(0..s) } else { 0 };
                if zero_pad {
                    let mut padded = sample.clone();
                    padded.input[(pad_slot + 1) * b..(pad_slot + 2) * b]
                        .copy_from_slice(&zeros);
                    padded.target[pad_slot] = F::zero();
                    out.push(sample);
                    out.push(padded);
                } else {
                    out.push(sample);
                }
            }
        }
    }
    Ok(out)
}

/// Mini-batch SGD with a fixed learning rate and per-epoch seeded shuffling.
/// Returns the per-epoch mean sample loss. Deterministic given the config.
pub fn train<F: Scalar>(
    params: &mut NetworkParams<F>,
    dataset: &[TrainingSample<F>],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let shape = params.shape();
    for sample in dataset {
        if sample.input.len() != shape.input_len() || sample.target.len() != shape.num_speakers() {
            return Err(Error::DimensionMismatch {
                expected: shape.input_len(),
                got: sample.input.len(),
                context: "training sample".into(),
            });
        }
    }

    let mut shuffle_rng = stream_rng(cfg.seed, DOMAIN_SHUFFLE, 0);
    let mut ws = Workspace::new(shape);
    let mut grads = NetworkGradients::zeros(shape);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let lr = F::from_f64_lossy(cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut batch_buf: Vec<TrainingSample<F>> = Vec::with_capacity(cfg.batch_size);

    for _ in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut loss_sum = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            batch_buf.clear();
            batch_buf.extend(chunk.iter().map(|&i| dataset[i].clone()));
            let mean_loss = accumulate_batch(params, &batch_buf, &mut ws, &mut grads);
            loss_sum += mean_loss.to_f64_lossy() * chunk.len() as f64;
            for layer in 0..6 {
                let g = grads.block(layer);
                let block = params.block_mut(layer);
                for (w, gw) in block.weights.iter_mut().zip(&g.weights) {
                    *w = *w - lr * *gw;
                }
                for (b, gb) in block.biases.iter_mut().zip(&g.biases) {
                    *b = *b - lr * *gb;
                }
            }
        }
        history.push(loss_sum / dataset.len() as f64);
    }
    Ok(history)
}
