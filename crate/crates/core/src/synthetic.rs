//! Seeded synthetic corpora with a known quality signal.
//!
//! References are random word sequences. A source is its reference
//! shuffled with a quarter of the words swapped for others, which stands in
//! for a cross-lingual encoder placing a sentence and its translation close
//! together. Each hypothesis copies the
//! reference and replaces every token with probability `p` by a token from a
//! small error vocabulary, so `p` controls quality. The human score of a
//! segment is the cosine similarity of the pooled hypothesis and reference
//! embeddings, rescaled to `[0, 1]`, plus Gaussian noise, times 100.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{DarrTuple, ScoreKind, SegmentRecord};
use crate::encoder::{embed, PoolingSpec, Provider};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub sources: usize,
    /// Hypotheses per source; system `k` produces the `k`-th one.
    pub systems: usize,
    /// Consecutive sources grouped into one document.
    pub doc_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub vocab: usize,
    pub error_vocab: usize,
    pub noise_sd: f64,
    /// Adds a paraphrased second reference to every record.
    pub second_reference: bool,
    pub lang_pair: String,
    pub id_prefix: String,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            sources: 1000,
            systems: 5,
            doc_size: 10,
            min_len: 8,
            max_len: 20,
            vocab: 2000,
            error_vocab: 4,
            noise_sd: 0.05,
            second_reference: false,
            lang_pair: "xx-yy".to_string(),
            id_prefix: "s".to_string(),
            seed: 1,
        }
    }
}

/// `(cos(pool h, pool r) + 1) / 2` with uniform pooling over the
/// provider's layers.
pub fn cosine_target(provider: &dyn Provider, hyp: &str, reference: &str) -> Result<f64> {
    let spec = PoolingSpec::uniform(provider.num_layers());
    let h = embed(provider, hyp, &spec)?;
    let r = embed(provider, reference, &spec)?;
    let dot: f64 = h.vector().iter().zip(r.vector()).map(|(a, b)| a * b).sum();
    let nh = h.vector().iter().map(|v| v * v).sum::<f64>().sqrt();
    let nr = r.vector().iter().map(|v| v * v).sum::<f64>().sqrt();
    if nh == 0.0 || nr == 0.0 {
        return Err(Error::numeric("cosine_target", "zero-norm embedding"));
    }
    Ok((dot / (nh * nr) + 1.0) / 2.0)
}

struct Sentence {
    reference: Vec<usize>,
    source: String,
}

fn words(ids: &[usize], prefix: &str) -> String {
    ids.iter().map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(" ")
}

fn sentence(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Sentence {
    let len = rng.random_range(cfg.min_len..=cfg.max_len);
    let reference: Vec<usize> = (0..len).map(|_| rng.random_range(0..cfg.vocab)).collect();
    let mut src: Vec<usize> = reference
        .iter()
        .map(|&t| if rng.random::<f64>() < 0.25 { rng.random_range(0..cfg.vocab) } else { t })
        .collect();
    src.shuffle(rng);
    Sentence {
        reference,
        source: words(&src, "w"),
    }
}

/// Reference tokens each replaced with probability `p` by an error token.
fn degrade(reference: &[usize], p: f64, cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> String {
    reference
        .iter()
        .map(|&t| {
            if rng.random::<f64>() < p {
                format!("x{}", rng.random_range(0..cfg.error_vocab))
            } else {
                format!("w{t}")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// A second reference: a fifth of the words swapped for other words.
fn paraphrase(reference: &[usize], cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> String {
    let ids: Vec<usize> = reference
        .iter()
        .map(|&t| if rng.random::<f64>() < 0.2 { rng.random_range(0..cfg.vocab) } else { t })
        .collect();
    words(&ids, "w")
}

fn validate(cfg: &SyntheticConfig) -> Result<()> {
    if cfg.sources == 0 || cfg.systems == 0 || cfg.doc_size == 0 {
        return Err(Error::contract("synthetic corpus needs sources, systems and doc_size > 0"));
    }
    if cfg.min_len == 0 || cfg.min_len > cfg.max_len || cfg.vocab == 0 || cfg.error_vocab == 0 {
        return Err(Error::contract("invalid synthetic sentence lengths or vocabularies"));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) {
        return Err(Error::contract("noise_sd must be finite and non-negative"));
    }
    Ok(())
}

/// Error-rate distribution of system `k`: better systems lean towards
/// small `p`, and the mixture over systems covers the whole range.
fn system_quality(k: usize, systems: usize) -> Beta<f64> {
    let spread = if systems > 1 { k as f64 / (systems - 1) as f64 } else { 0.5 };
    Beta::new(0.5 + 0.6 * spread, 0.5 + 0.6 * (1.0 - spread)).expect("positive shape parameters")
}

/// DA-scored segments, `sources × systems` of them, grouped by source.
pub fn generate_da(cfg: &SyntheticConfig, provider: &dyn Provider) -> Result<Vec<SegmentRecord>> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sd.max(f64::MIN_POSITIVE)).expect("valid std");
    let quality: Vec<Beta<f64>> = (0..cfg.systems).map(|k| system_quality(k, cfg.systems)).collect();
    let mut out = Vec::with_capacity(cfg.sources * cfg.systems);
    for i in 0..cfg.sources {
        let s = sentence(cfg, &mut rng);
        let reference = words(&s.reference, "w");
        let mut references = vec![reference.clone()];
        if cfg.second_reference {
            references.push(paraphrase(&s.reference, cfg, &mut rng));
        }
        for (k, q) in quality.iter().enumerate() {
            let p = q.sample(&mut rng);
            let hyp = degrade(&s.reference, p, cfg, &mut rng);
            let eps = if cfg.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            let target = cosine_target(provider, &hyp, &reference)? + eps;
            out.push(SegmentRecord {
                id: format!("{}{i}-{k}", cfg.id_prefix),
                lang_pair: cfg.lang_pair.clone(),
                source: s.source.clone(),
                hypothesis: hyp,
                references: references.clone(),
                human_score: Some(100.0 * target),
                score_kind: ScoreKind::Da,
                system_id: format!("sys{k}"),
                doc_id: Some(format!("{}doc{}", cfg.id_prefix, i / cfg.doc_size)),
                seg_index: Some(i as u64),
                line: None,
            });
        }
    }
    Ok(out)
}

/// Ranking tuples in which the better hypothesis is strictly closer to the
/// reference (Euclidean distance of uniformly pooled embeddings). Every
/// pair of a source's hypotheses yields one tuple unless the distances tie.
pub fn generate_darr(cfg: &SyntheticConfig, provider: &dyn Provider) -> Result<Vec<DarrTuple>> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spec = PoolingSpec::uniform(provider.num_layers());
    let mut out = Vec::new();
    for _ in 0..cfg.sources {
        let s = sentence(cfg, &mut rng);
        let reference = words(&s.reference, "w");
        let r = embed(provider, &reference, &spec)?;
        let mut hyps = Vec::with_capacity(cfg.systems);
        for _ in 0..cfg.systems {
            let p: f64 = rng.random();
            let h = degrade(&s.reference, p, cfg, &mut rng);
            let e = embed(provider, &h, &spec)?;
            let d: f64 = e
                .vector()
                .iter()
                .zip(r.vector())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            hyps.push((h, d));
        }
        for a in 0..hyps.len() {
            for b in a + 1..hyps.len() {
                let (ha, da) = &hyps[a];
                let (hb, db) = &hyps[b];
                if da == db || ha == hb {
                    continue;
                }
                let (better, worse) = if da < db { (ha, hb) } else { (hb, ha) };
                out.push(DarrTuple {
                    source: s.source.clone(),
                    reference: reference.clone(),
                    hyp_better: better.clone(),
                    hyp_worse: worse.clone(),
                    lang_pair: cfg.lang_pair.clone(),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::HashedProvider;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            sources: 6,
            systems: 3,
            doc_size: 2,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn da_corpus_shape_and_determinism() {
        let p = HashedProvider::new(16, 2, 3).unwrap();
        let a = generate_da(&small(), &p).unwrap();
        assert_eq!(a.len(), 18);
        assert_eq!(a, generate_da(&small(), &p).unwrap());
        assert_eq!(a[0].doc_id.as_deref(), Some("sdoc0"));
        assert_eq!(a[5].doc_id.as_deref(), Some("sdoc0"));
        assert_eq!(a[6].doc_id.as_deref(), Some("sdoc1"));
        assert!(a.iter().all(|r| r.human_score.is_some() && r.references.len() == 1));
    }

    #[test]
    fn noiseless_scores_are_the_cosine_target() {
        let p = HashedProvider::new(16, 2, 3).unwrap();
        let cfg = SyntheticConfig {
            noise_sd: 0.0,
            ..small()
        };
        for r in generate_da(&cfg, &p).unwrap() {
            let t = cosine_target(&p, &r.hypothesis, &r.references[0]).unwrap();
            assert_eq!(r.human_score.unwrap(), 100.0 * t);
        }
        assert!((cosine_target(&p, "w1 w2", "w2 w1").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn darr_better_is_closer() {
        let p = HashedProvider::new(16, 1, 3).unwrap();
        let spec = PoolingSpec::uniform(1);
        let tuples = generate_darr(&small(), &p).unwrap();
        assert!(!tuples.is_empty());
        for t in tuples {
            let r = embed(&p, &t.reference, &spec).unwrap();
            let dist = |h: &str| {
                let e = embed(&p, h, &spec).unwrap();
                e.vector().iter().zip(r.vector()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            };
            assert!(dist(&t.hyp_better) < dist(&t.hyp_worse));
        }
    }
}
