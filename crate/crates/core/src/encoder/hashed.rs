use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::stack::TokenEmbeddingStack;
use super::Provider;
use crate::corpus::Tokenizer;
use crate::error::{Error, Result};

/// Deterministic, untrainable provider: every (token, layer) pair is hashed
/// to a seed and expanded into a Gaussian vector with per-coordinate variance
/// `1/dim`, so token vectors have unit expected squared norm.
#[derive(Debug, Clone)]
pub struct HashedProvider {
    id: String,
    dim: usize,
    layers: usize,
    seed: u64,
    tokenizer: Tokenizer,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl HashedProvider {
    pub fn new(dim: usize, layers: usize, seed: u64) -> Result<Self> {
        Self::with_tokenizer(dim, layers, seed, Tokenizer::default())
    }

    pub fn with_tokenizer(dim: usize, layers: usize, seed: u64, tokenizer: Tokenizer) -> Result<Self> {
        if dim == 0 || layers == 0 {
            return Err(Error::contract("hashed provider needs dim >= 1 and layers >= 1"));
        }
        Ok(HashedProvider {
            id: format!("hashed-d{dim}-l{layers}-s{seed}"),
            dim,
            layers,
            seed,
            tokenizer,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    /// The vector of one token at one layer.
    pub fn token_vector(&self, token: &str, layer: usize) -> Vec<f64> {
        let key = splitmix(fnv1a(token.as_bytes()) ^ splitmix(self.seed).rotate_left(17) ^ splitmix(layer as u64 + 1));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let scale = 1.0 / (self.dim as f64).sqrt();
        (0..self.dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect()
    }
}

impl Provider for HashedProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn num_layers(&self) -> usize {
        self.layers
    }

    fn encode(&self, text: &str) -> Result<TokenEmbeddingStack> {
        let tokens = self.tokenizer.tokenize(text);
        if tokens.is_empty() {
            return Err(Error::contract("cannot encode an empty segment"));
        }
        let layers = (0..self.layers)
            .map(|l| tokens.iter().flat_map(|t| self.token_vector(t, l)).collect())
            .collect();
        TokenEmbeddingStack::new(layers, tokens.len(), self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_is_deterministic() {
        let p = HashedProvider::new(16, 2, 7).unwrap();
        let a = p.encode("hello world").unwrap();
        let b = p.encode("hello world").unwrap();
        assert_eq!(a, b);
        let bits_a: Vec<u64> = a.layer(0).iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = b.layer(0).iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }

    #[test]
    fn shape_follows_tokens_layers_and_dim() {
        let p = HashedProvider::new(16, 2, 7).unwrap();
        let s = p.encode("a b c").unwrap();
        assert_eq!(s.num_layers(), 2);
        assert_eq!(s.token_count(), 3);
        assert_eq!(s.dim(), 16);
        assert_eq!(s.layer(1).len(), 48);
    }

    #[test]
    fn layers_and_seeds_differ() {
        let p = HashedProvider::new(8, 2, 1).unwrap();
        assert_ne!(p.token_vector("x", 0), p.token_vector("x", 1));
        let q = HashedProvider::new(8, 2, 2).unwrap();
        assert_ne!(p.token_vector("x", 0), q.token_vector("x", 0));
        // same token repeated in a sentence embeds identically
        let s = p.encode("x y x").unwrap();
        assert_eq!(s.token(0, 0), s.token(0, 2));
    }

    #[test]
    fn empty_text_is_rejected() {
        let p = HashedProvider::new(8, 1, 1).unwrap();
        assert!(matches!(p.encode("   "), Err(Error::Contract(_))));
    }

    #[test]
    fn coordinates_have_zero_mean_and_variance_one_over_dim() {
        let d = 16;
        let p = HashedProvider::new(d, 1, 3).unwrap();
        let n = 10_000;
        let vectors: Vec<Vec<f64>> = (0..n).map(|i| p.token_vector(&format!("tok{i}"), 0)).collect();
        let var = 1.0 / d as f64;
        for j in 0..d {
            let mean = vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64;
            let emp_var = vectors.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            // 3 sigma bounds for the sample mean and the sample variance of a Gaussian
            let mean_sd = (var / n as f64).sqrt();
            let var_sd = var * (2.0 / (n - 1) as f64).sqrt();
            assert!(mean.abs() < 3.0 * mean_sd, "coord {j} mean {mean}");
            assert!((emp_var - var).abs() < 3.0 * var_sd, "coord {j} var {emp_var}");
        }
    }
}
