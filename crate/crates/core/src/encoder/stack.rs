use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token-level outputs of every encoder layer for one segment.
///
/// Each layer is a row-major `token_count × dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingStack {
    layers: Vec<Vec<f64>>,
    token_count: usize,
    dim: usize,
}

impl TokenEmbeddingStack {
    pub fn new(layers: Vec<Vec<f64>>, token_count: usize, dim: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("embedding stack needs at least one layer"));
        }
        if token_count == 0 || dim == 0 {
            return Err(Error::contract("embedding stack must have tokens and a positive dimension"));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.len() != token_count * dim {
                return Err(Error::contract(format!(
                    "layer {l} has {} values, expected {token_count}x{dim}",
                    layer.len()
                )));
            }
            if layer.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("encoder layer {l}"), "non-finite token embedding"));
            }
        }
        Ok(TokenEmbeddingStack {
            layers,
            token_count,
            dim,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layer(&self, l: usize) -> &[f64] {
        &self.layers[l]
    }

    pub fn token(&self, l: usize, t: usize) -> &[f64] {
        &self.layers[l][t * self.dim..(t + 1) * self.dim]
    }

    /// `alpha * self + beta * other`, for stacks of identical shape.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.num_layers() != other.num_layers() || self.token_count != other.token_count || self.dim != other.dim {
            return Err(Error::contract("cannot combine stacks of different shapes"));
        }
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect())
            .collect();
        TokenEmbeddingStack::new(layers, self.token_count, self.dim)
    }
}

/// Pooled, fixed-size representation of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEmbedding {
    vector: Vec<f64>,
    provider_id: Arc<str>,
}

impl SegmentEmbedding {
    pub fn new(vector: Vec<f64>, provider_id: impl Into<Arc<str>>) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::contract("segment embedding must be non-empty"));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("segment embedding", "non-finite entry"));
        }
        Ok(SegmentEmbedding {
            vector,
            provider_id: provider_id.into(),
        })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    /// Errors unless `others` come from the same provider with the same dim.
    pub fn check_compatible<'a>(&self, others: impl IntoIterator<Item = &'a SegmentEmbedding>) -> Result<()> {
        for o in others {
            if o.provider_id != self.provider_id {
                return Err(Error::contract(format!(
                    "embeddings from different providers: `{}` and `{}`",
                    self.provider_id, o.provider_id
                )));
            }
            if o.dim() != self.dim() {
                return Err(Error::contract(format!(
                    "embedding dimension mismatch: {} vs {}",
                    self.dim(),
                    o.dim()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenReduction {
    #[default]
    Mean,
}

/// Scalar mix over layers followed by a reduction over tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingSpec {
    layer_weights: Vec<f64>,
    pub token_reduction: TokenReduction,
}

impl PoolingSpec {
    pub fn uniform(num_layers: usize) -> Self {
        let n = num_layers.max(1);
        PoolingSpec {
            layer_weights: vec![1.0 / n as f64; n],
            token_reduction: TokenReduction::Mean,
        }
    }

    /// Normalizes non-negative weights to sum to one.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) || sum <= 0.0 {
            return Err(Error::contract("layer weights must be non-negative with a positive sum"));
        }
        Ok(PoolingSpec {
            layer_weights: weights.iter().map(|w| w / sum).collect(),
            token_reduction: TokenReduction::Mean,
        })
    }

    /// Softmax of unnormalized layer scores; this is the trainable form.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::contract("layer logits must be non-empty"));
        }
        Ok(PoolingSpec {
            layer_weights: softmax(logits),
            token_reduction: TokenReduction::Mean,
        })
    }

    pub fn layer_weights(&self) -> &[f64] {
        &self.layer_weights
    }

    pub fn num_layers(&self) -> usize {
        self.layer_weights.len()
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean over tokens of the weighted layer mix.
pub fn pool(stack: &TokenEmbeddingStack, spec: &PoolingSpec, provider_id: &str) -> Result<SegmentEmbedding> {
    if spec.num_layers() != stack.num_layers() {
        return Err(Error::contract(format!(
            "pooling has {} layer weights but the stack has {} layers",
            spec.num_layers(),
            stack.num_layers()
        )));
    }
    let d = stack.dim();
    let t_count = stack.token_count();
    let mut out = vec![0.0; d];
    for (l, &w) in spec.layer_weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let layer = stack.layer(l);
        for t in 0..t_count {
            let row = &layer[t * d..(t + 1) * d];
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
    }
    let inv = 1.0 / t_count as f64;
    for o in &mut out {
        *o *= inv;
    }
    SegmentEmbedding::new(out, provider_id)
}
