//! Training helpers shared by the model tests and the acceptance harness.

use mteval_core::corpus::{DarrTuple, SegmentRecord, Tokenizer};
use mteval_core::encoder::ToyEncoder;
use mteval_core::model::{
    ranker_score, train_with, Encoder, ModelConfig, ModelParams, ProviderSpec, TrainData,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fixtures;

pub fn toy_params(layers: usize, freeze: bool) -> ModelParams {
    let enc = ToyEncoder::build(["a b c", "d e"], 4, layers, 1, Tokenizer::default()).unwrap();
    let mut cfg = ModelConfig::estimator(4);
    cfg.freeze_embeddings = freeze;
    let spec = ProviderSpec::Toy {
        layers,
        seed: 1,
        lowercase: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    ModelParams::init(&cfg, spec, layers, Some(enc), &mut rng).unwrap()
}

/// Sum of absolute parameter changes per encoder layer, bottom first.
pub fn layer_update_magnitudes(before: &ModelParams, after: &ModelParams) -> Vec<f64> {
    let (b, a) = (before.encoder.as_ref().unwrap(), after.encoder.as_ref().unwrap());
    b.layers
        .iter()
        .zip(&a.layers)
        .map(|(lb, la)| {
            lb.w.iter()
                .chain(&lb.b)
                .zip(la.w.iter().chain(&la.b))
                .map(|(x, y)| (x - y).abs())
                .sum()
        })
        .collect()
}

pub fn corpus_texts(records: &[SegmentRecord]) -> Vec<&str> {
    records
        .iter()
        .flat_map(|r| [r.source.as_str(), r.hypothesis.as_str(), r.references[0].as_str()])
        .collect()
}

pub fn train_toy(records: &[SegmentRecord], freeze: bool) -> (ToyEncoder, ModelParams) {
    let spec = ProviderSpec::Toy {
        layers: 2,
        seed: 3,
        lowercase: false,
    };
    let mut cfg = ModelConfig::estimator(16);
    cfg.hidden1 = 24;
    cfg.hidden2 = 12;
    cfg.epochs = 5;
    cfg.freeze_embeddings = freeze;
    cfg.lr_base = 0.1;
    let Encoder::Toy(enc) = spec.instantiate(16, corpus_texts(records)).unwrap() else { unreachable!() };
    let out = train_with(TrainData::Segments(records), &cfg, spec, Encoder::Toy(enc.clone()), &mut |_| {}).unwrap();
    (enc, out.params)
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Fraction of held-out tuples whose better hypothesis gets the higher
/// ranker score.
pub fn ranker_pair_accuracy(params: &ModelParams, tuples: &[DarrTuple]) -> f64 {
    let p = fixtures::provider();
    let correct = tuples
        .iter()
        .filter(|t| {
            let s = params.embed(&p, &t.source).unwrap();
            let r = params.embed(&p, &t.reference).unwrap();
            let b = params.embed(&p, &t.hyp_better).unwrap();
            let w = params.embed(&p, &t.hyp_worse).unwrap();
            ranker_score(&s, &b, &r, params).unwrap() > ranker_score(&s, &w, &r, params).unwrap()
        })
        .count();
    correct as f64 / tuples.len() as f64
}
