//! Losses and scores over already-pooled embeddings.

use super::config::ModelMode;
use super::features::{check_dim, features_backward, raw_features};
use super::params::{Head, ModelParams};
use super::ranker::{inverted_harmonic, triplet_backward, triplet_hinge, TripletView};
use crate::encoder::SegmentEmbedding;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EstimatorItem {
    pub source: SegmentEmbedding,
    pub hypothesis: SegmentEmbedding,
    /// `None` for quality-estimation models.
    pub reference: Option<SegmentEmbedding>,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct RankerItem {
    pub source: SegmentEmbedding,
    pub reference: SegmentEmbedding,
    pub better: SegmentEmbedding,
    pub worse: SegmentEmbedding,
}

#[derive(Debug, Clone)]
pub enum TrainBatch {
    Estimator(Vec<EstimatorItem>),
    Ranker(Vec<RankerItem>),
}

/// Raw feed-forward pass over a prepared feature vector.
pub fn forward(features: &[f64], params: &ModelParams) -> Result<f64> {
    params.ffn()?.forward(features)
}

/// Builds the feature vector for `[a; h; b]` (or `[a; h]`) and scores it.
pub fn predict(
    params: &ModelParams,
    anchor_a: &SegmentEmbedding,
    hyp: &SegmentEmbedding,
    anchor_b: Option<&SegmentEmbedding>,
) -> Result<f64> {
    let cfg = &params.config;
    match (cfg.mode, anchor_b) {
        (ModelMode::Ranker, _) => return Err(Error::contract("ranker parameters cannot regress a score")),
        (ModelMode::Estimator, None) => return Err(Error::contract("estimator needs a reference slot")),
        (ModelMode::QeEstimator, Some(_)) => return Err(Error::contract("QE estimator takes no reference")),
        _ => {}
    }
    check_dim(anchor_a, cfg.embed_dim)?;
    let x = super::features::feature_vector(anchor_a, hyp, anchor_b, cfg.extra_features)?;
    forward(&x, params)
}

fn estimator_items(batch: &TrainBatch) -> Result<&[EstimatorItem]> {
    match batch {
        TrainBatch::Estimator(items) if !items.is_empty() => Ok(items),
        TrainBatch::Estimator(_) => Err(Error::contract("empty training batch")),
        TrainBatch::Ranker(_) => Err(Error::contract("expected an estimator batch")),
    }
}

fn ranker_items(batch: &TrainBatch) -> Result<&[RankerItem]> {
    match batch {
        TrainBatch::Ranker(items) if !items.is_empty() => Ok(items),
        TrainBatch::Ranker(_) => Err(Error::contract("empty training batch")),
        TrainBatch::Estimator(_) => Err(Error::contract("expected a ranker batch")),
    }
}

/// Mean squared error, dropout off.
pub fn estimator_loss(batch: &TrainBatch, params: &ModelParams) -> Result<f64> {
    let items = estimator_items(batch)?;
    let mut sum = 0.0;
    for it in items {
        let p = predict(params, &it.source, &it.hypothesis, it.reference.as_ref())?;
        sum += (p - it.target).powi(2);
    }
    Ok(sum / items.len() as f64)
}

/// Gradients of one estimator batch with respect to the head and to every
/// input embedding.
#[derive(Debug, Clone)]
pub struct EstimatorGrads {
    pub head: Head,
    /// `(d source, d hypothesis, d reference)` per item; the reference
    /// gradient is empty without a reference.
    pub inputs: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

pub fn estimator_loss_grad(batch: &TrainBatch, params: &ModelParams) -> Result<(f64, EstimatorGrads)> {
    let items = estimator_items(batch)?;
    let ffn = params.ffn()?;
    let extra = params.config.extra_features;
    let mut g = ffn.zeros_like();
    let mut inputs = Vec::with_capacity(items.len());
    let n = items.len() as f64;
    let mut sum = 0.0;
    // dropout is off, so the generator is never drawn from
    let mut no_rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    for it in items {
        let b = it.reference.as_ref().map(|r| r.vector());
        let x = raw_features(it.source.vector(), it.hypothesis.vector(), b, extra);
        let cache = ffn.forward_train(&x, 0.0, &mut no_rng)?;
        let err = cache.out - it.target;
        sum += err * err;
        let dx = ffn.backward(&cache, 2.0 * err / n, &mut g);
        inputs.push(features_backward(it.source.vector(), it.hypothesis.vector(), b, extra, &dx));
    }
    Ok((
        sum / n,
        EstimatorGrads {
            head: Head::Ffn(g),
            inputs,
        },
    ))
}

/// Dual-anchor triplet hinge for one tuple, using the model's margin.
pub fn ranker_loss(item: &RankerItem, params: &ModelParams) -> Result<f64> {
    let proj = params.projection()?;
    let d = params.config.embed_dim;
    for e in [&item.source, &item.reference, &item.better, &item.worse] {
        check_dim(e, d)?;
    }
    let ds_p = proj.distance(item.source.vector(), item.better.vector())?;
    let ds_n = proj.distance(item.source.vector(), item.worse.vector())?;
    let dr_p = proj.distance(item.reference.vector(), item.better.vector())?;
    let dr_n = proj.distance(item.reference.vector(), item.worse.vector())?;
    Ok(triplet_hinge(ds_p, ds_n, dr_p, dr_n, params.config.margin))
}

/// Mean hinge over a batch and its gradient with respect to the projection.
pub fn ranker_loss_grad(batch: &TrainBatch, params: &ModelParams) -> Result<(f64, Head)> {
    let items = ranker_items(batch)?;
    let proj = params.projection()?;
    let mut gw = proj.zeros_like();
    let n = items.len() as f64;
    let mut sum = 0.0;
    for it in items {
        let view = TripletView {
            s: it.source.vector(),
            r: it.reference.vector(),
            pos: it.better.vector(),
            neg: it.worse.vector(),
        };
        let (l, _) = triplet_backward(proj, view, params.config.margin, 1.0 / n, &mut gw)?;
        sum += l;
    }
    Ok((sum / n, Head::Projection(gw)))
}

/// `1 / (1 + harmonic_mean(d(s,h), d(r,h)))` in the projected space.
pub fn ranker_score(
    s: &SegmentEmbedding,
    h: &SegmentEmbedding,
    r: &SegmentEmbedding,
    params: &ModelParams,
) -> Result<f64> {
    let proj = params.projection()?;
    s.check_compatible([h, r])?;
    check_dim(s, params.config.embed_dim)?;
    let ds = proj.distance(s.vector(), h.vector())?;
    let dr = proj.distance(r.vector(), h.vector())?;
    Ok(inverted_harmonic(ds, dr))
}
