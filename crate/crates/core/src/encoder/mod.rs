//! Segment encoders and the pooling layer.

pub mod hashed;
pub mod remote;
pub mod stack;
pub mod toy;

pub use hashed::HashedProvider;
pub use remote::{registered_dim, EmbeddingCache, RemoteConfig, RemoteProvider, Transport};
pub use stack::{pool, PoolingSpec, SegmentEmbedding, TokenEmbeddingStack, TokenReduction};
pub use toy::{DenseLayer, ToyEncoder, ToyGrads, ToyTrace};

use crate::error::Result;

/// A source of token-level embedding stacks.
///
/// Implementations are read-only after construction and may be shared
/// across threads.
pub trait Provider: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn num_layers(&self) -> usize;
    fn encode(&self, text: &str) -> Result<TokenEmbeddingStack>;

    /// Encodes several texts, in order. Remote providers send them as one
    /// request.
    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddingStack>> {
        texts.iter().map(|t| self.encode(t)).collect()
    }
}

/// Encodes and pools one segment.
pub fn embed(provider: &dyn Provider, text: &str, spec: &PoolingSpec) -> Result<SegmentEmbedding> {
    pool(&provider.encode(text)?, spec, provider.id())
}
