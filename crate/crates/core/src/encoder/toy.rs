//! A small trainable encoder: an embedding table followed by a stack of
//! per-token dense + tanh layers. It has no attention; its purpose is to give
//! the training loop real encoder parameters (a frozen table, decayed layer
//! learning rates) to act on.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::stack::TokenEmbeddingStack;
use super::Provider;
use crate::corpus::Tokenizer;
use crate::error::{Error, Result};

pub const UNK_ROW: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Row-major `dim × dim` (output × input).
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    id: String,
    dim: usize,
    tokenizer: Tokenizer,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    /// Row-major `(vocab + 1) × dim`; row 0 is the shared unknown-token row.
    pub embedding: Vec<f64>,
    pub layers: Vec<DenseLayer>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ToyTrace {
    pub token_ids: Vec<usize>,
    /// `acts[0]` is the embedding lookup, `acts[l]` the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct ToyGrads {
    pub embedding: BTreeMap<usize, Vec<f64>>,
    pub layers: Vec<DenseLayer>,
}

impl ToyGrads {
    pub fn zeros(enc: &ToyEncoder) -> Self {
        ToyGrads {
            embedding: BTreeMap::new(),
            layers: enc
                .layers
                .iter()
                .map(|l| DenseLayer {
                    w: vec![0.0; l.w.len()],
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
        }
    }
}

impl ToyEncoder {
    /// Builds the vocabulary from `texts` and initializes weights from `seed`.
    pub fn build<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        dim: usize,
        num_layers: usize,
        seed: u64,
        tokenizer: Tokenizer,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for t in texts {
            for tok in tokenizer.tokenize(t) {
                set.insert(tok);
            }
        }
        let vocab: Vec<String> = set.into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x746f_795f_656e_63);
        let emb_dist = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).map_err(|e| Error::contract(e.to_string()))?;
        let embedding = (0..(vocab.len() + 1) * dim).map(|_| emb_dist.sample(&mut rng)).collect();
        let layers = (0..num_layers)
            .map(|_| DenseLayer {
                w: (0..dim * dim).map(|_| emb_dist.sample(&mut rng)).collect(),
                b: vec![0.0; dim],
            })
            .collect();
        Self::from_parts(vocab, dim, tokenizer, embedding, layers)
    }

    pub fn from_parts(
        vocab: Vec<String>,
        dim: usize,
        tokenizer: Tokenizer,
        embedding: Vec<f64>,
        layers: Vec<DenseLayer>,
    ) -> Result<Self> {
        if dim == 0 || layers.is_empty() {
            return Err(Error::contract("toy encoder needs dim >= 1 and at least one layer"));
        }
        if embedding.len() != (vocab.len() + 1) * dim {
            return Err(Error::contract("embedding table shape does not match vocabulary"));
        }
        if layers.iter().any(|l| l.w.len() != dim * dim || l.b.len() != dim) {
            return Err(Error::contract("dense layer shape does not match dim"));
        }
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i + 1)).collect();
        Ok(ToyEncoder {
            id: format!("toy-d{dim}-l{}", layers.len()),
            dim,
            tokenizer,
            vocab,
            index,
            embedding,
            layers,
        })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn token_id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ROW)
    }

    pub fn trace(&self, text: &str) -> Result<ToyTrace> {
        let tokens = self.tokenizer.tokenize(text);
        if tokens.is_empty() {
            return Err(Error::contract("cannot encode an empty segment"));
        }
        let d = self.dim;
        let token_ids: Vec<usize> = tokens.iter().map(|t| self.token_id(t)).collect();
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut x: Vec<f64> = token_ids
            .iter()
            .flat_map(|&id| self.embedding[id * d..(id + 1) * d].iter().copied())
            .collect();
        acts.push(x.clone());
        for layer in &self.layers {
            let mut y = vec![0.0; x.len()];
            for t in 0..token_ids.len() {
                let input = &x[t * d..(t + 1) * d];
                for o in 0..d {
                    let row = &layer.w[o * d..(o + 1) * d];
                    let z: f64 = layer.b[o] + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>();
                    y[t * d + o] = z.tanh();
                }
            }
            acts.push(y.clone());
            x = y;
        }
        Ok(ToyTrace { token_ids, acts })
    }

    pub fn stack_from_trace(&self, trace: &ToyTrace) -> Result<TokenEmbeddingStack> {
        TokenEmbeddingStack::new(trace.acts[1..].to_vec(), trace.token_ids.len(), self.dim)
    }

    /// Accumulates parameter gradients given `upstream[l]`, the gradient with
    /// respect to the output of layer `l + 1` (each `tokens × dim`).
    pub fn backward(&self, trace: &ToyTrace, upstream: &[Vec<f64>], grads: &mut ToyGrads) {
        let d = self.dim;
        let n_tok = trace.token_ids.len();
        let n_layers = self.layers.len();
        let mut carry = vec![0.0; n_tok * d];
        for l in (0..n_layers).rev() {
            let out = &trace.acts[l + 1];
            let input = &trace.acts[l];
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            let mut next = vec![0.0; n_tok * d];
            for t in 0..n_tok {
                for o in 0..d {
                    let idx = t * d + o;
                    let grad_out = carry[idx] + upstream[l][idx];
                    let delta = grad_out * (1.0 - out[idx] * out[idx]);
                    if delta == 0.0 {
                        continue;
                    }
                    g.b[o] += delta;
                    let row = &layer.w[o * d..(o + 1) * d];
                    let grow = &mut g.w[o * d..(o + 1) * d];
                    let x = &input[t * d..(t + 1) * d];
                    for i in 0..d {
                        grow[i] += delta * x[i];
                        next[t * d + i] += delta * row[i];
                    }
                }
            }
            carry = next;
        }
        for (t, &id) in trace.token_ids.iter().enumerate() {
            let row = grads.embedding.entry(id).or_insert_with(|| vec![0.0; d]);
            for i in 0..d {
                row[i] += carry[t * d + i];
            }
        }
    }
}

impl Provider for ToyEncoder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn num_layers(&self) -> usize {
        self.layers.len()
    }

    fn encode(&self, text: &str) -> Result<TokenEmbeddingStack> {
        self.stack_from_trace(&self.trace(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc() -> ToyEncoder {
        ToyEncoder::build(["the cat sat", "a dog ran"], 4, 2, 5, Tokenizer::default()).unwrap()
    }

    #[test]
    fn vocabulary_is_sorted_and_unk_is_shared() {
        let e = enc();
        assert_eq!(e.vocab(), &["a", "cat", "dog", "ran", "sat", "the"]);
        assert_eq!(e.token_id("zebra"), UNK_ROW);
        assert_eq!(e.token_id("okapi"), UNK_ROW);
        let s = e.encode("zebra okapi").unwrap();
        assert_eq!(s.token(1, 0), s.token(1, 1));
    }

    #[test]
    fn stack_shape() {
        let s = enc().encode("the cat").unwrap();
        assert_eq!((s.num_layers(), s.token_count(), s.dim()), (2, 2, 4));
    }

    #[test]
    fn changing_layer_weights_changes_the_stack() {
        let mut e = enc();
        let before = e.encode("the cat").unwrap();
        e.layers[0].w[0] += 0.5;
        assert_ne!(before, e.encode("the cat").unwrap());
    }

    #[test]
    fn backward_matches_finite_differences() {
        // loss = sum over layers and tokens of c · output, with fixed random c
        let e = enc();
        let trace = e.trace("the cat zebra").unwrap();
        let coeffs: Vec<Vec<f64>> = (0..2)
            .map(|l| (0..12).map(|i| ((i * 7 + l * 3) % 5) as f64 * 0.3 - 0.6).collect())
            .collect();
        let loss = |enc: &ToyEncoder| -> f64 {
            let tr = enc.trace("the cat zebra").unwrap();
            (0..2).map(|l| tr.acts[l + 1].iter().zip(&coeffs[l]).map(|(a, c)| a * c).sum::<f64>()).sum()
        };
        let mut grads = ToyGrads::zeros(&e);
        e.backward(&trace, &coeffs, &mut grads);
        let h = 1e-6;
        let check = |get: &dyn Fn(&mut ToyEncoder) -> &mut f64, analytic: f64| {
            let mut p = e.clone();
            *get(&mut p) += h;
            let up = loss(&p);
            let mut m = e.clone();
            *get(&mut m) -= h;
            let down = loss(&m);
            let numeric = (up - down) / (2.0 * h);
            assert!((numeric - analytic).abs() < 1e-6 * analytic.abs().max(1.0), "{numeric} vs {analytic}");
        };
        check(&|p| &mut p.layers[0].w[5], grads.layers[0].w[5]);
        check(&|p| &mut p.layers[1].b[2], grads.layers[1].b[2]);
        let cat = e.token_id("cat");
        check(&|p| &mut p.embedding[cat * 4 + 1], grads.embedding[&cat][1]);
        check(&|p| &mut p.embedding[2], grads.embedding[&UNK_ROW][2]);
    }
}
