//! The speaker-tracking network: three kernel-3 valid convolutions over the
//! embedding axis followed by three dense layers, sigmoid outputs, one score
//! per tracked speaker. Forward pass and analytic gradients are hand-written
//! so training has no framework dependency and gradients can be audited
//! against finite differences.
//!
//! Input layout: `S + 1` channels of length `b`, channel 0 the segment
//! embedding, channels `1..=S` the bank models in bank order. Valid kernel-3
//! convolutions shrink the length axis `b -> b-2 -> b-4 -> b-6` while the
//! channel counts go `S+1 -> S^3 -> S^2 -> S`; the flattened `(b-6)*S`
//! activations feed dense layers `32S -> 16S -> S`.

mod checkpoint;
mod train;

pub use checkpoint::{load_network, load_network_path, save_network, save_network_path};
pub use train::{build_training_set, train, TrainConfig, TrainingSample};

use rand::Rng;

use crate::embedding::{EmbeddingSegment, ModelBank};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, DOMAIN_INIT};
use crate::scalar::Scalar;

pub const LAYER_NAMES: [&str; 6] = ["conv1", "conv2", "conv3", "dense1", "dense2", "dense3"];
const KERNEL: usize = 3;

/// Architecture sizes, fully determined by the embedding dimension `b` and
/// the number of tracked speakers `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkShape {
    embedding_dim: usize,
    num_speakers: usize,
}

impl NetworkShape {
    pub fn new(embedding_dim: usize, num_speakers: usize) -> Result<Self> {
        if embedding_dim < 8 {
            return Err(Error::InvalidArgument(format!(
                "embedding dim must be >= 8 so three kernel-3 convolutions fit, got {embedding_dim}"
            )));
        }
        if num_speakers < 1 {
            return Err(Error::InvalidArgument(
                "need at least one tracked speaker".into(),
            ));
        }
        Ok(NetworkShape {
            embedding_dim,
            num_speakers,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn num_speakers(&self) -> usize {
        self.num_speakers
    }

    pub fn input_channels(&self) -> usize {
        self.num_speakers + 1
    }

    pub fn input_len(&self) -> usize {
        self.input_channels() * self.embedding_dim
    }

    /// (in_channels, out_channels, in_len) of conv layer 0..3.
    fn conv_spec(&self, layer: usize) -> (usize, usize, usize) {
        let s = self.num_speakers;
        let b = self.embedding_dim;
        match layer {
            0 => (s + 1, s * s * s, b),
            1 => (s * s * s, s * s, b - 2),
            2 => (s * s, s, b - 4),
            _ => unreachable!("conv layer index"),
        }
    }

    /// (in_dim, out_dim) of dense layer 0..3.
    fn dense_spec(&self, layer: usize) -> (usize, usize) {
        let s = self.num_speakers;
        let b = self.embedding_dim;
        match layer {
            0 => ((b - 6) * s, 32 * s),
            1 => (32 * s, 16 * s),
            2 => (16 * s, s),
            _ => unreachable!("dense layer index"),
        }
    }

    /// (weights, biases) lengths of layer 0..6 (convs then denses).
    fn block_sizes(&self, layer: usize) -> (usize, usize) {
        if layer < 3 {
            let (in_ch, out_ch, _) = self.conv_spec(layer);
            (out_ch * in_ch * KERNEL, out_ch)
        } else {
            let (in_dim, out_dim) = self.dense_spec(layer - 3);
            (out_dim * in_dim, out_dim)
        }
    }

    /// Total flattened size entering and leaving every layer, in order.
    /// Convolution sizes count `channels * length`.
    pub fn size_chain(&self) -> Vec<(usize, usize)> {
        let s = self.num_speakers;
        let b = self.embedding_dim;
        vec![
            (b * (s + 1), (b - 2) * s * s * s),
            ((b - 2) * s * s * s, (b - 4) * s * s),
            ((b - 4) * s * s, (b - 6) * s),
            ((b - 6) * s, 32 * s),
            (32 * s, 16 * s),
            (16 * s, s),
        ]
    }
}

/// One layer's parameters or gradients: weights then biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Block<F: Scalar> {
    pub weights: Vec<F>,
    pub biases: Vec<F>,
}

impl<F: Scalar> Block<F> {
    fn zeros(weights: usize, biases: usize) -> Self {
        Block {
            weights: vec![F::zero(); weights],
            biases: vec![F::zero(); biases],
        }
    }

    fn fill_zero(&mut self) {
        self.weights.iter_mut().for_each(|w| *w = F::zero());
        self.biases.iter_mut().for_each(|b| *b = F::zero());
    }
}

/// All weights of the tracking network, shape-locked to `(b, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<F: Scalar> {
    shape: NetworkShape,
    seed: u64,
    blocks: Vec<Block<F>>,
}

impl<F: Scalar> NetworkParams<F> {
    pub fn shape(&self) -> NetworkShape {
        self.shape
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn block(&self, layer: usize) -> &Block<F> {
        &self.blocks[layer]
    }

    pub fn block_mut(&mut self, layer: usize) -> &mut Block<F> {
        &mut self.blocks[layer]
    }

    /// Zero-valued parameter set, mainly useful in tests.
    pub fn zeros(shape: NetworkShape) -> Self {
        let blocks = (0..6)
            .map(|i| {
                let (w, b) = shape.block_sizes(i);
                Block::zeros(w, b)
            })
            .collect();
        NetworkParams {
            shape,
            seed: 0,
            blocks,
        }
    }

    pub fn expect_shape(&self, embedding_dim: usize, num_speakers: usize) -> Result<()> {
        if self.shape.embedding_dim != embedding_dim || self.shape.num_speakers != num_speakers {
            return Err(Error::InvalidArgument(format!(
                "network built for b={} S={}, data has b={} S={}",
                self.shape.embedding_dim, self.shape.num_speakers, embedding_dim, num_speakers
            )));
        }
        Ok(())
    }
}

/// Same storage layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGradients<F: Scalar> {
    blocks: Vec<Block<F>>,
}

impl<F: Scalar> NetworkGradients<F> {
    pub fn zeros(shape: NetworkShape) -> Self {
        NetworkGradients {
            blocks: NetworkParams::<F>::zeros(shape).blocks,
        }
    }

    pub fn block(&self, layer: usize) -> &Block<F> {
        &self.blocks[layer]
    }

    fn fill_zero(&mut self) {
        self.blocks.iter_mut().for_each(Block::fill_zero);
    }

    fn scale(&mut self, factor: F) {
        for block in &mut self.blocks {
            block.weights.iter_mut().for_each(|w| *w *= factor);
            block.biases.iter_mut().for_each(|b| *b *= factor);
        }
    }
}

/// Initialize weights: uniform `+-sqrt(6 / fan_in)` for the ReLU layers,
/// uniform `+-sqrt(6 / (fan_in + fan_out))` for the sigmoid output layer,
/// biases zero. Deterministic per seed.
pub fn init_network<F: Scalar>(shape: NetworkShape, seed: u64) -> NetworkParams<F> {
    let mut rng = stream_rng(seed, DOMAIN_INIT, 0);
    let mut params = NetworkParams::zeros(shape);
    params.seed = seed;
    for layer in 0..6 {
        let fan_in = if layer < 3 {
            shape.conv_spec(layer).0 * KERNEL
        } else {
            shape.dense_spec(layer - 3).0
        };
        let limit = if layer == 5 {
            let (fi, fo) = shape.dense_spec(2);
            (6.0 / (fi + fo) as f64).sqrt()
        } else {
            (6.0 / fan_in as f64).sqrt()
        };
        for w in &mut params.blocks[layer].weights {
            *w = F::from_f64_lossy(rng.random_range(-limit..limit));
        }
    }
    params
}

/// Concatenate the segment embedding and the (possibly zero-padded) model
/// vectors into the channel-major input layout.
pub fn assemble_input<F: Scalar>(x: &[F], models: &[&[F]]) -> Result<Vec<F>> {
    let b = x.len();
    let mut out = Vec::with_capacity(b * (models.len() + 1));
    out.extend_from_slice(x);
    for m in models {
        if m.len() != b {
            return Err(Error::DimensionMismatch {
                expected: b,
                got: m.len(),
                context: "model vector in network input".into(),
            });
        }
        out.extend_from_slice(m);
    }
    Ok(out)
}

/// Input for a segment against a bank, in bank order.
pub fn assemble_for_bank<F: Scalar>(
    segment: &EmbeddingSegment<F>,
    bank: &ModelBank<F>,
) -> Result<Vec<F>> {
    let models: Vec<&[F]> = bank.models().iter().map(|m| m.vector.as_slice()).collect();
    assemble_input(&segment.vector, &models)
}

/// Reusable forward/backward buffers for one network shape.
#[derive(Debug, Clone)]
pub struct Workspace<F: Scalar> {
    conv_z: [Vec<F>; 3],
    conv_a: [Vec<F>; 3],
    dense_z: [Vec<F>; 3],
    dense_a: [Vec<F>; 3],
    d_conv: [Vec<F>; 3],
    d_dense: [Vec<F>; 3],
    d_conv_in: [Vec<F>; 3],
}

impl<F: Scalar> Workspace<F> {
    pub fn new(shape: NetworkShape) -> Self {
        let conv_size = |i: usize| {
            let (_, out_ch, in_len) = shape.conv_spec(i);
            out_ch * (in_len - 2)
        };
        let conv_in_size = |i: usize| {
            let (in_ch, _, in_len) = shape.conv_spec(i);
            in_ch * in_len
        };
        let dense_size = |i: usize| shape.dense_spec(i).1;
        Workspace {
            conv_z: [0, 1, 2].map(|i| vec![F::zero(); conv_size(i)]),
            conv_a: [0, 1, 2].map(|i| vec![F::zero(); conv_size(i)]),
            dense_z: [0, 1, 2].map(|i| vec![F::zero(); dense_size(i)]),
            dense_a: [0, 1, 2].map(|i| vec![F::zero(); dense_size(i)]),
            d_conv: [0, 1, 2].map(|i| vec![F::zero(); conv_size(i)]),
            d_dense: [0, 1, 2].map(|i| vec![F::zero(); dense_size(i)]),
            d_conv_in: [0, 1, 2].map(|i| vec![F::zero(); conv_in_size(i)]),
        }
    }

    /// Sigmoid outputs of the last forward pass.
    pub fn scores(&self) -> &[F] {
        &self.dense_a[2]
    }
}

fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

fn conv_forward<F: Scalar>(
    input: &[F],
    weights: &[F],
    biases: &[F],
    in_ch: usize,
    out_ch: usize,
    in_len: usize,
    z: &mut [F],
    a: &mut [F],
) {
    let out_len = in_len - 2;
    for o in 0..out_ch {
        let bias = biases[o];
        for p in 0..out_len {
            let mut acc = bias;
            for i in 0..in_ch {
                let ib = i * in_len + p;
                let wb = (o * in_ch + i) * KERNEL;
                acc += weights[wb] * input[ib]
                    + weights[wb + 1] * input[ib + 1]
                    + weights[wb + 2] * input[ib + 2];
            }
            let idx = o * out_len + p;
            z[idx] = acc;
            a[idx] = acc.max(F::zero());
        }
    }
}

fn dense_forward<F: Scalar>(
    input: &[F],
    weights: &[F],
    biases: &[F],
    in_dim: usize,
    out_dim: usize,
    z: &mut [F],
) {
    for o in 0..out_dim {
        let mut acc = biases[o];
        let row = &weights[o * in_dim..(o + 1) * in_dim];
        for (w, x) in row.iter().zip(input.iter()) {
            acc += *w * *x;
        }
        z[o] = acc;
    }
}

/// Forward pass into a reusable workspace; returns nothing, scores live in
/// `ws.scores()`.
pub fn forward_into<F: Scalar>(params: &NetworkParams<F>, input: &[F], ws: &mut Workspace<F>) {
    let shape = params.shape;
    debug_assert_eq!(input.len(), shape.input_len());
    for layer in 0..3 {
        let (in_ch, out_ch, in_len) = shape.conv_spec(layer);
        let block = &params.blocks[layer];
        let (done, rest) = ws.conv_a.split_at_mut(layer);
        let src: &[F] = if layer == 0 { input } else { &done[layer - 1] };
        conv_forward(
            src,
            &block.weights,
            &block.biases,
            in_ch,
            out_ch,
            in_len,
            &mut ws.conv_z[layer],
            &mut rest[0],
        );
    }
    for layer in 0..3 {
        let (in_dim, out_dim) = shape.dense_spec(layer);
        let block = &params.blocks[layer + 3];
        let (done, rest) = ws.dense_a.split_at_mut(layer);
        let src: &[F] = if layer == 0 { &ws.conv_a[2] } else { &done[layer - 1] };
        let z = &mut ws.dense_z[layer];
        dense_forward(src, &block.weights, &block.biases, in_dim, out_dim, z);
        let a = &mut rest[0];
        for o in 0..out_dim {
            a[o] = if layer == 2 { sigmoid(z[o]) } else { z[o].max(F::zero()) };
        }
    }
}

/// Forward pass; convenience wrapper allocating a fresh workspace.
pub fn forward<F: Scalar>(params: &NetworkParams<F>, input: &[F]) -> Result<Vec<F>> {
    if input.len() != params.shape.input_len() {
        return Err(Error::DimensionMismatch {
            expected: params.shape.input_len(),
            got: input.len(),
            context: "network input".into(),
        });
    }
    let mut ws = Workspace::new(params.shape);
    forward_into(params, input, &mut ws);
    Ok(ws.scores().to_vec())
}

/// Score one segment against a bank in bank order.
pub fn score_segment<F: Scalar>(
    params: &NetworkParams<F>,
    segment: &EmbeddingSegment<F>,
    bank: &ModelBank<F>,
) -> Result<Vec<F>> {
    params.expect_shape(segment.dim(), bank.size())?;
    let input = assemble_for_bank(segment, bank)?;
    forward(params, &input)
}

fn clamp_bounds<F: Scalar>() -> (F, F) {
    let lo = F::from_f64_lossy(1e-7).max(F::epsilon());
    (lo, F::one() - lo)
}

/// Mean over outputs of binary cross-entropy, scores clamped away from 0/1.
pub fn bce_loss<F: Scalar>(scores: &[F], targets: &[F]) -> F {
    assert_eq!(scores.len(), targets.len());
    let (lo, hi) = clamp_bounds::<F>();
    let mut acc = F::zero();
    for (&p, &t) in scores.iter().zip(targets.iter()) {
        let p = p.max(lo).min(hi);
        acc = acc - (t * p.ln() + (F::one() - t) * (F::one() - p).ln());
    }
    acc / F::from_f64_lossy(scores.len() as f64)
}

/// Backward pass for one sample that already went through `forward_into`.
/// Accumulates parameter gradients into `grads` and returns the sample loss.
fn backward_into<F: Scalar>(
    params: &NetworkParams<F>,
    input: &[F],
    target: &[F],
    ws: &mut Workspace<F>,
    grads: &mut NetworkGradients<F>,
) -> F {
    let shape = params.shape;
    let s = shape.num_speakers;
    debug_assert_eq!(target.len(), s);
    let loss = bce_loss(&ws.dense_a[2], target);

    // Output layer: d loss / d z for sigmoid + clamped BCE. Where the clamp
    // saturates, the loss is locally constant in the score.
    let (lo, hi) = clamp_bounds::<F>();
    let inv_s = F::one() / F::from_f64_lossy(s as f64);
    for o in 0..s {
        let p = ws.dense_a[2][o];
        ws.d_dense[2][o] = if p <= lo || p >= hi {
            F::zero()
        } else {
            (p - target[o]) * inv_s
        };
    }

    // Dense layers, last to first. d_dense[layer] holds dz for layer 2 and
    // d(post-activation) for layers 0 and 1.
    for layer in (0..3).rev() {
        let (in_dim, out_dim) = shape.dense_spec(layer);
        let block = &params.blocks[layer + 3];
        let gblock = &mut grads.blocks[layer + 3];
        let (head, tail) = ws.d_dense.split_at_mut(layer);
        let d_out: &[F] = &tail[0];
        let input_act: &[F] = if layer == 0 { &ws.conv_a[2] } else { &ws.dense_a[layer - 1] };
        let d_in: &mut [F] = if layer == 0 { &mut ws.d_conv[2] } else { &mut head[layer - 1] };
        d_in.iter_mut().for_each(|d| *d = F::zero());
        for o in 0..out_dim {
            let dz = if layer == 2 {
                d_out[o]
            } else {
                // ReLU subgradient at 0 is 0.
                if ws.dense_z[layer][o] > F::zero() { d_out[o] } else { F::zero() }
            };
            if dz == F::zero() {
                continue;
            }
            gblock.biases[o] += dz;
            let row = &block.weights[o * in_dim..(o + 1) * in_dim];
            let grow = &mut gblock.weights[o * in_dim..(o + 1) * in_dim];
            for i in 0..in_dim {
                grow[i] += dz * input_act[i];
                d_in[i] += row[i] * dz;
            }
        }
    }

    // Conv layers, last to first. d_conv[layer] holds d(post-activation);
    // the gradient towards the previous layer accumulates in d_conv_in.
    for layer in (0..3).rev() {
        let (in_ch, out_ch, in_len) = shape.conv_spec(layer);
        let out_len = in_len - 2;
        let block = &params.blocks[layer];
        let gblock = &mut grads.blocks[layer];
        let input_act: &[F] = if layer == 0 { input } else { &ws.conv_a[layer - 1] };
        let propagate = layer > 0;
        if propagate {
            ws.d_conv_in[layer].iter_mut().for_each(|d| *d = F::zero());
        }
        for o in 0..out_ch {
            for p in 0..out_len {
                let idx = o * out_len + p;
                let dz = if ws.conv_z[layer][idx] > F::zero() {
                    ws.d_conv[layer][idx]
                } else {
                    F::zero()
                };
                if dz == F::zero() {
                    continue;
                }
                gblock.biases[o] += dz;
                for i in 0..in_ch {
                    let ib = i * in_len + p;
                    let wb = (o * in_ch + i) * KERNEL;
                    gblock.weights[wb] += dz * input_act[ib];
                    gblock.weights[wb + 1] += dz * input_act[ib + 1];
                    gblock.weights[wb + 2] += dz * input_act[ib + 2];
                    if propagate {
                        ws.d_conv_in[layer][ib] += block.weights[wb] * dz;
                        ws.d_conv_in[layer][ib + 1] += block.weights[wb + 1] * dz;
                        ws.d_conv_in[layer][ib + 2] += block.weights[wb + 2] * dz;
                    }
                }
            }
        }
        if propagate {
            // The next (shallower) layer reads its output gradient from
            // d_conv[layer - 1].
            let src: &[F] = &ws.d_conv_in[layer];
            ws.d_conv[layer - 1].copy_from_slice(src);
        }
    }
    loss
}

/// Exact analytic gradient of the mean batch loss.
pub fn gradients<F: Scalar>(
    params: &NetworkParams<F>,
    batch: &[train::TrainingSample<F>],
) -> Result<(NetworkGradients<F>, F)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("gradient batch is empty".into()));
    }
    let mut ws = Workspace::new(params.shape);
    let mut grads = NetworkGradients::zeros(params.shape);
    let loss = accumulate_batch(params, batch, &mut ws, &mut grads);
    Ok((grads, loss))
}

/// Zero `grads`, accumulate over the batch and normalize by the batch size.
/// Returns the mean loss.
pub(crate) fn accumulate_batch<F: Scalar>(
    params: &NetworkParams<F>,
    batch: &[train::TrainingSample<F>],
    ws: &mut Workspace<F>,
    grads: &mut NetworkGradients<F>,
) -> F {
    grads.fill_zero();
    let mut loss_sum = F::zero();
    for sample in batch {
        forward_into(params, &sample.input, ws);
        loss_sum += backward_into(params, &sample.input, &sample.target, ws, grads);
    }
    let inv = F::one() / F::from_f64_lossy(batch.len() as f64);
    grads.scale(inv);
    loss_sum * inv
}

/// Loss of a batch without touching gradients.
pub fn batch_loss<F: Scalar>(
    params: &NetworkParams<F>,
    batch: &[train::TrainingSample<F>],
    ws: &mut Workspace<F>,
) -> F {
    let mut acc = F::zero();
    for sample in batch {
        forward_into(params, &sample.input, ws);
        acc += bce_loss(ws.scores(), &sample.target);
    }
    acc / F::from_f64_lossy(batch.len() as f64)
}

/// Result of one finite-difference gradient audit.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst: String,
}

/// Compare analytic gradients against central finite differences (h = 1e-4)
/// on one random sample. Coordinates where both gradients are below 1e-7 in
/// magnitude are compared absolutely.
pub fn grad_check(embedding_dim: usize, num_speakers: usize, seed: u64) -> Result<GradCheckReport> {
    let shape = NetworkShape::new(embedding_dim, num_speakers)?;
    let mut params = init_network::<f64>(shape, seed);
    let mut rng = stream_rng(seed, DOMAIN_INIT, 1);
    let input: Vec<f64> = (0..shape.input_len())
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    let target: Vec<f64> = (0..num_speakers)
        .map(|_| if rng.random_range(0.0..1.0) < 0.5 { 0.0 } else { 1.0 })
        .collect();
    let sample = train::TrainingSample {
        input,
        target,
    };
    let batch = [sample];
    let (grads, _) = gradients(&params, &batch)?;

    let mut ws = Workspace::new(shape);
    let h = 1e-4;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: String::new(),
    };
    for layer in 0..6 {
        let (w_len, b_len) = shape.block_sizes(layer);
        for part in 0..2 {
            let len = if part == 0 { w_len } else { b_len };
            for i in 0..len {
                let read = |p: &NetworkParams<f64>| {
                    if part == 0 { p.blocks[layer].weights[i] } else { p.blocks[layer].biases[i] }
                };
                let write = |p: &mut NetworkParams<f64>, v: f64| {
                    if part == 0 {
                        p.blocks[layer].weights[i] = v;
                    } else {
                        p.blocks[layer].biases[i] = v;
                    }
                };
                let orig = read(&params);
                write(&mut params, orig + h);
                let up = batch_loss(&params, &batch, &mut ws);
                write(&mut params, orig - h);
                let down = batch_loss(&params, &batch, &mut ws);
                write(&mut params, orig);
                let numeric = (up - down) / (2.0 * h);
                let analytic = if part == 0 {
                    grads.blocks[layer].weights[i]
                } else {
                    grads.blocks[layer].biases[i]
                };
                let abs = (analytic - numeric).abs();
                let denom = analytic.abs().max(numeric.abs());
                let rel = if denom < 1e-7 { 0.0 } else { abs / denom };
                if abs > report.max_abs_error {
                    report.max_abs_error = abs;
                }
                if rel > report.max_rel_error {
                    report.max_rel_error = rel;
                    report.worst = format!(
                        "{}[{}][{}]: analytic {analytic:.3e} vs numeric {numeric:.3e}",
                        LAYER_NAMES[layer],
                        if part == 0 { "w" } else { "b" },
                        i
                    );
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_rejects_small_embedding() {
        assert!(NetworkShape::new(7, 2).is_err());
        assert!(NetworkShape::new(8, 0).is_err());
        assert!(NetworkShape::new(8, 1).is_ok());
    }

    #[test]
    fn init_is_deterministic_and_shapes_match() {
        let shape = NetworkShape::new(32, 2).unwrap();
        let a = init_network::<f64>(shape, 9);
        let b = init_network::<f64>(shape, 9);
        assert_eq!(a, b);
        let c = init_network::<f64>(shape, 10);
        assert_ne!(a, c);

        // conv1 at (b=32, S=2): 8 filters x 3 channels x 3 taps.
        assert_eq!(a.block(0).weights.len(), 72);
        assert_eq!(a.block(0).biases.len(), 8);
        // Biases start at zero.
        assert!(a.block(0).biases.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dense1_maps_two_to_thirty_two_at_minimum_shape() {
        let shape = NetworkShape::new(8, 1).unwrap();
        assert_eq!(shape.dense_spec(0), (2, 32));
    }

    #[test]
    fn size_chain_matches_formulas_for_all_audited_shapes() {
        for b in [8usize, 16, 32, 64] {
            for s in [1usize, 2, 3] {
                let shape = NetworkShape::new(b, s).unwrap();
                let chain = shape.size_chain();
                assert_eq!(
                    chain,
                    vec![
                        (b * (s + 1), (b - 2) * s.pow(3)),
                        ((b - 2) * s.pow(3), (b - 4) * s.pow(2)),
                        ((b - 4) * s.pow(2), (b - 6) * s),
                        ((b - 6) * s, 32 * s),
                        (32 * s, 16 * s),
                        (16 * s, s),
                    ]
                );
                // Chain is consistent: each output feeds the next input.
                for pair in chain.windows(2) {
                    assert_eq!(pair[0].1, pair[1].0);
                }
            }
        }
    }

    #[test]
    fn forward_dimensions_follow_the_chain() {
        let shape = NetworkShape::new(32, 2).unwrap();
        let ws = Workspace::<f64>::new(shape);
        assert_eq!(ws.conv_a[0].len(), 30 * 8);
        assert_eq!(ws.conv_a[1].len(), 28 * 4);
        assert_eq!(ws.conv_a[2].len(), 26 * 2);
        assert_eq!(ws.dense_a[0].len(), 64);
        assert_eq!(ws.dense_a[1].len(), 32);
        assert_eq!(ws.dense_a[2].len(), 2);
    }

    #[test]
    fn zero_network_scores_half() {
        let shape = NetworkShape::new(32, 2).unwrap();
        let params = NetworkParams::<f64>::zeros(shape);
        let input = vec![0.3f64; shape.input_len()];
        let scores = forward(&params, &input).unwrap();
        assert_eq!(scores, vec![0.5, 0.5]);
    }

    #[test]
    fn scores_stay_strictly_inside_unit_interval() {
        let shape = NetworkShape::new(8, 2).unwrap();
        let params = init_network::<f64>(shape, 3);
        for k in 0..20 {
            let input: Vec<f64> = (0..shape.input_len())
                .map(|i| ((i + k) as f64 * 0.7).sin() * 10.0)
                .collect();
            for &score in &forward(&params, &input).unwrap() {
                assert!(score > 0.0 && score < 1.0);
            }
        }
    }

    #[test]
    fn forward_rejects_misshaped_input() {
        let shape = NetworkShape::new(8, 2).unwrap();
        let params = NetworkParams::<f64>::zeros(shape);
        assert!(forward(&params, &[0.0; 5]).is_err());
    }

    #[test]
    fn assemble_input_layout() {
        let x = [1.0f64; 8];
        let m1 = [2.0f64; 8];
        let m2 = [0.0f64; 8];
        let input = assemble_input(&x, &[&m1[..], &m2[..]]).unwrap();
        assert_eq!(input.len(), 24);
        assert!(input[8..16].iter().all(|&v| v == 2.0));
        assert!(input[16..].iter().all(|&v| v == 0.0));

        let short = [1.0f64; 7];
        assert!(assemble_input(&x, &[&short[..]]).is_err());
    }

    #[test]
    fn bce_examples() {
        let ln2 = (2.0f64).ln();
        let loss = bce_loss(&[0.5, 0.5], &[1.0, 0.0]);
        assert!((loss - ln2).abs() < 1e-12);

        let loss = bce_loss(&[1.0 - 1e-9, 1e-9], &[1.0, 0.0]);
        assert!(loss <= 1e-6);

        let loss = bce_loss(&[1e-7], &[1.0]);
        assert!((loss - 16.118095650958319).abs() < 1e-9);
    }

    #[test]
    fn forward_works_in_f32() {
        let shape = NetworkShape::new(8, 2).unwrap();
        let params = init_network::<f32>(shape, 3);
        let input = vec![0.5f32; shape.input_len()];
        let scores = forward(&params, &input).unwrap();
        assert_eq!(scores.len(), 2);
        assert!(scores.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let report = grad_check(10, 2, 7).unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "max rel error {} at {}",
            report.max_rel_error,
            report.worst
        );
    }

    #[test]
    fn duplicated_sample_leaves_mean_gradient_unchanged() {
        let shape = NetworkShape::new(10, 2).unwrap();
        let params = init_network::<f64>(shape, 5);
        let mut rng = stream_rng(5, DOMAIN_INIT, 9);
        let sample = train::TrainingSample {
            input: (0..shape.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            target: vec![1.0, 0.0],
        };
        let single = [sample.clone()];
        let double = [sample.clone(), sample];
        let (g1, l1) = gradients(&params, &single).unwrap();
        let (g2, l2) = gradients(&params, &double).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for layer in 0..6 {
            for (a, b) in g1.block(layer).weights.iter().zip(&g2.block(layer).weights) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_input_with_zero_biases_zeroes_conv_weight_gradients() {
        let shape = NetworkShape::new(10, 2).unwrap();
        let mut params = init_network::<f64>(shape, 6);
        for layer in 0..6 {
            params.block_mut(layer).biases.iter_mut().for_each(|b| *b = 0.0);
        }
        let sample = train::TrainingSample {
            input: vec![0.0; shape.input_len()],
            target: vec![1.0, 0.0],
        };
        let (grads, _) = gradients(&params, &[sample]).unwrap();
        for layer in 0..3 {
            assert!(
                grads.block(layer).weights.iter().all(|&g| g == 0.0),
                "conv weight taps see only zero activations"
            );
        }
    }
}
