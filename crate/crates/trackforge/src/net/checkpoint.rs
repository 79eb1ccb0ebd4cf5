//! Network checkpoint format:
//!
//! ```text
//! trackforge-net v1 b=<b> S=<S> seed=<seed>
//! conv1 <weights...> <biases...>
//! ...
//! dense3 <weights...> <biases...>
//! ```
//!
//! Weights come first, then biases, row-major, space-separated decimal
//! floats with shortest round-trip formatting.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{init_network, NetworkParams, NetworkShape, LAYER_NAMES};

pub fn save_network<F: Scalar>(writer: impl Write, params: &NetworkParams<F>) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let shape = params.shape();
    writeln!(
        w,
        "trackforge-net v1 b={} S={} seed={}",
        shape.embedding_dim(),
        shape.num_speakers(),
        params.seed()
    )?;
    for (layer, name) in LAYER_NAMES.iter().enumerate() {
        let block = params.block(layer);
        write!(w, "{name}")?;
        for v in block.weights.iter().chain(block.biases.iter()) {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_network_path<F: Scalar>(path: impl AsRef<Path>, params: &NetworkParams<F>) -> Result<()> {
    save_network(std::fs::File::create(path)?, params)
}

fn header_field(token: Option<&str>, key: &str) -> Result<u64> {
    let token = token.ok_or_else(|| Error::Checkpoint(format!("missing {key}= field")))?;
    token
        .strip_prefix(&format!("{key}="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("bad {key}= field {token:?}")))
}

pub fn load_network<F: Scalar>(reader: impl Read) -> Result<NetworkParams<F>> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty checkpoint".into()))??;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("trackforge-net") || tokens.next() != Some("v1") {
        return Err(Error::Checkpoint("not a trackforge-net v1 checkpoint".into()));
    }
    let b = header_field(tokens.next(), "b")? as usize;
    let s = header_field(tokens.next(), "S")? as usize;
    let seed = header_field(tokens.next(), "seed")?;

    let shape = NetworkShape::new(b, s)?;
    let mut params = init_network::<F>(shape, seed);
    for (layer, name) in LAYER_NAMES.iter().enumerate() {
        let line = lines
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("missing layer {name}")))??;
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some(*name) {
            return Err(Error::Checkpoint(format!("expected layer {name}")));
        }
        let (w_len, b_len) = shape.block_sizes(layer);
        let values: Vec<F> = tokens
            .map(|t| {
                t.parse::<F>()
                    .map_err(|_| Error::Checkpoint(format!("bad float {t:?} in layer {name}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != w_len + b_len {
            return Err(Error::Checkpoint(format!(
                "layer {name} expects {} values, got {}",
                w_len + b_len,
                values.len()
            )));
        }
        let block = params.block_mut(layer);
        block.weights.copy_from_slice(&values[..w_len]);
        block.biases.copy_from_slice(&values[w_len..]);
    }
    Ok(params)
}

pub fn load_network_path<F: Scalar>(path: impl AsRef<Path>) -> Result<NetworkParams<F>> {
    load_network(std::fs::File::open(path)?)
}
