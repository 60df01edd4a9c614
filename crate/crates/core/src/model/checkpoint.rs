//! Self-describing checkpoint container.
//!
//! Layout: the 8-byte magic `MTEVCKP1`, a little-endian `u64` header
//! length, the JSON header, then every tensor as little-endian `f64` values
//! in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, ModelMode};
use super::ffn::Ffn;
use super::params::{Head, ModelParams, ProviderSpec};
use super::ranker::Projection;
use crate::corpus::Tokenizer;
use crate::encoder::{DenseLayer, ToyEncoder};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MTEVCKP1";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorEntry {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub fingerprint: String,
    pub config: ModelConfig,
    pub provider: ProviderSpec,
    pub training_step: u64,
    pub target_range: Option<(f64, f64)>,
    /// Toy-encoder vocabulary, without the unknown-token row.
    #[serde(default)]
    pub vocab: Option<Vec<String>>,
    pub tensors: Vec<TensorEntry>,
}

fn manifest(params: &ModelParams) -> Vec<(TensorEntry, Vec<f64>)> {
    let mut out = Vec::new();
    let entry = |name: &str, shape: Vec<usize>| TensorEntry {
        name: name.to_string(),
        shape,
    };
    match &params.head {
        Head::Ffn(f) => {
            let shapes = [
                vec![f.hidden1, f.input],
                vec![f.hidden1],
                vec![f.hidden2, f.hidden1],
                vec![f.hidden2],
                vec![f.hidden2],
                vec![1],
            ];
            for ((name, t), shape) in f.tensors().into_iter().zip(shapes) {
                out.push((entry(name, shape), t.to_vec()));
            }
        }
        Head::Projection(p) => out.push((entry("proj.w", vec![p.dim, p.dim]), p.w.clone())),
    }
    out.push((
        entry("pooling.logits", vec![params.pooling_logits.len()]),
        params.pooling_logits.clone(),
    ));
    if let Some(enc) = &params.encoder {
        let d = params.config.embed_dim;
        out.push((
            entry("encoder.embedding", vec![enc.vocab().len() + 1, d]),
            enc.embedding.clone(),
        ));
        for (i, l) in enc.layers.iter().enumerate() {
            out.push((entry(&format!("encoder.layer{i}.w"), vec![d, d]), l.w.clone()));
            out.push((entry(&format!("encoder.layer{i}.b"), vec![d]), l.b.clone()));
        }
    }
    out
}

pub fn to_bytes(params: &ModelParams) -> Result<Vec<u8>> {
    let tensors = manifest(params);
    let header = CheckpointHeader {
        format_version: CHECKPOINT_FORMAT_VERSION,
        fingerprint: params.fingerprint(),
        config: params.config.clone(),
        provider: params.provider.clone(),
        training_step: params.training_step,
        target_range: params.target_range,
        vocab: params.encoder.as_ref().map(|e| e.vocab().to_vec()),
        tensors: tensors.iter().map(|(e, _)| e.clone()).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let payload: usize = tensors.iter().map(|(_, v)| v.len() * 8).sum();
    let mut out = Vec::with_capacity(16 + json.len() + payload);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, values) in &tensors {
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_params(params: &ModelParams, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(params)?)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Reads only the header, for inspection.
pub fn read_header(bytes: &[u8]) -> Result<(CheckpointHeader, usize)> {
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(corrupt("not a checkpoint file (bad magic or truncated)"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let end = 16usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt("truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[16..end]).map_err(|e| corrupt(format!("unreadable header: {e}")))?;
    Ok((header, end))
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    let (h, start) = read_header(bytes)?;
    if h.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(corrupt(format!("unsupported format version {}", h.format_version)));
    }
    let fp = h.config.fingerprint();
    if fp != h.fingerprint {
        return Err(corrupt(format!(
            "config fingerprint mismatch: header says {}, config hashes to {fp}",
            h.fingerprint
        )));
    }
    h.config.validate()?;
    let expected: usize = h.tensors.iter().map(|t| t.len() * 8).sum();
    if bytes.len() - start != expected {
        return Err(corrupt(format!(
            "payload is {} bytes, manifest needs {expected} (truncated or padded file)",
            bytes.len() - start
        )));
    }
    let mut offset = start;
    let mut take = |entry: &TensorEntry| -> Vec<f64> {
        let n = entry.len();
        let v = bytes[offset..offset + n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        offset += n * 8;
        v
    };
    let mut tensors = h.tensors.iter();
    let mut next = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
        let e = tensors.next().ok_or_else(|| corrupt(format!("manifest lacks `{name}`")))?;
        if e.name != name || e.shape != shape {
            return Err(corrupt(format!(
                "manifest entry `{}` {:?} does not match expected `{name}` {:?}",
                e.name, e.shape, shape
            )));
        }
        Ok(take(e))
    };
    let c = &h.config;
    let d = c.embed_dim;
    let head = match c.mode {
        ModelMode::Ranker => Head::Projection(Projection {
            dim: d,
            w: next("proj.w", &[d, d])?,
        }),
        _ => {
            let (i, h1, h2) = (c.input_dim(), c.hidden1, c.hidden2);
            Head::Ffn(Ffn {
                input: i,
                hidden1: h1,
                hidden2: h2,
                w1: next("ffn.w1", &[h1, i])?,
                b1: next("ffn.b1", &[h1])?,
                w2: next("ffn.w2", &[h2, h1])?,
                b2: next("ffn.b2", &[h2])?,
                w3: next("ffn.w3", &[h2])?,
                b3: next("ffn.b3", &[1])?[0],
            })
        }
    };
    let n_layers = h
        .tensors
        .iter()
        .find(|t| t.name == "pooling.logits")
        .map(|t| t.len())
        .ok_or_else(|| corrupt("manifest lacks `pooling.logits`"))?;
    if n_layers == 0 {
        return Err(corrupt("pooling over zero layers"));
    }
    let pooling_logits = next("pooling.logits", &[n_layers])?;
    let encoder = match (&h.provider, &h.vocab) {
        (ProviderSpec::Toy { lowercase, .. }, Some(vocab)) => {
            let embedding = next("encoder.embedding", &[vocab.len() + 1, d])?;
            let mut layers = Vec::with_capacity(n_layers);
            for i in 0..n_layers {
                layers.push(DenseLayer {
                    w: next(&format!("encoder.layer{i}.w"), &[d, d])?,
                    b: next(&format!("encoder.layer{i}.b"), &[d])?,
                });
            }
            Some(ToyEncoder::from_parts(
                vocab.clone(),
                d,
                Tokenizer { lowercase: *lowercase },
                embedding,
                layers,
            )?)
        }
        (ProviderSpec::Toy { .. }, None) => return Err(corrupt("toy provider without a vocabulary")),
        _ => None,
    };
    if tensors.next().is_some() {
        return Err(corrupt("manifest has unexpected extra tensors"));
    }
    let params = ModelParams {
        config: h.config,
        provider: h.provider,
        head,
        pooling_logits,
        encoder,
        target_range: h.target_range,
        training_step: h.training_step,
    };
    if !params.all_finite() {
        return Err(corrupt("non-finite parameter values"));
    }
    Ok(params)
}

pub fn load_params(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}
