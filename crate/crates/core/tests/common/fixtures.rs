//! Small synthetic corpora for training tests.

use mteval_core::corpus::{DarrTuple, SegmentRecord};
use mteval_core::encoder::HashedProvider;
use mteval_core::model::ProviderSpec;
use mteval_core::synthetic::{generate_da, generate_darr, SyntheticConfig};

pub const DIM: usize = 32;
pub const LAYERS: usize = 2;
pub const PROVIDER_SEED: u64 = 7;

pub fn provider() -> HashedProvider {
    HashedProvider::new(DIM, LAYERS, PROVIDER_SEED).unwrap()
}

pub fn spec() -> ProviderSpec {
    ProviderSpec::hashed(DIM, LAYERS, PROVIDER_SEED)
}

pub fn da(sources: usize, seed: u64, prefix: &str) -> Vec<SegmentRecord> {
    let cfg = SyntheticConfig {
        sources,
        seed,
        id_prefix: prefix.to_string(),
        ..SyntheticConfig::default()
    };
    generate_da(&cfg, &provider()).unwrap()
}

pub fn darr(sources: usize, seed: u64) -> Vec<DarrTuple> {
    let cfg = SyntheticConfig {
        sources,
        seed,
        ..SyntheticConfig::default()
    };
    generate_darr(&cfg, &provider()).unwrap()
}

/// A random DARR instance: up to 50 tuples over small per-source hypothesis
/// pools, scored on a coarse grid so that ties are common. Returns the
/// tuples, the score map, and the (better, worse) score of every tuple.
pub fn random_darr_instance(
    rng: &mut impl rand::Rng,
) -> (Vec<DarrTuple>, mteval_core::metaeval::MetricScores, Vec<(f64, f64)>) {
    let n = rng.random_range(1..=50);
    let sources = rng.random_range(1..=10);
    let pool: Vec<Vec<f64>> = (0..sources)
        .map(|_| (0..4).map(|_| f64::from(rng.random_range(0..5u8)) / 4.0).collect())
        .collect();
    let mut scores = mteval_core::metaeval::MetricScores::new();
    for (s, hyps) in pool.iter().enumerate() {
        for (h, v) in hyps.iter().enumerate() {
            scores.insert((format!("src {s}"), format!("hyp {s}.{h}")), *v);
        }
    }
    let mut tuples = Vec::with_capacity(n);
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let s = rng.random_range(0..sources);
        let b = rng.random_range(0..4);
        let w = (b + rng.random_range(1..4)) % 4;
        tuples.push(DarrTuple {
            source: format!("src {s}"),
            reference: format!("ref {s}"),
            hyp_better: format!("hyp {s}.{b}"),
            hyp_worse: format!("hyp {s}.{w}"),
            lang_pair: "xx-yy".to_string(),
        });
        pairs.push((pool[s][b], pool[s][w]));
    }
    (tuples, scores, pairs)
}
