//! Mini-batch training loop for estimators and rankers.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, ModelMode};
use super::features::{features_backward, raw_features};
use super::optim::{lr_groups, Optimizer};
use super::params::{Encoder, Head, ModelParams, ParamGrads, ProviderSpec};
use super::ranker::{triplet_backward, triplet_hinge, TripletView};
use crate::corpus::{DarrTuple, SegmentRecord};
use crate::encoder::stack::softmax;
use crate::encoder::{Provider, ToyEncoder, ToyTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub enum TrainData<'a> {
    /// Scored segments for the estimators.
    Segments(&'a [SegmentRecord]),
    /// Relative-ranking tuples for the ranker.
    Darr(&'a [DarrTuple]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Training-set loss in evaluation mode after the epoch's updates.
    pub loss: f64,
    pub lr_groups: BTreeMap<String, f64>,
    pub wall_ms: u64,
    /// Root mean square of the per-step global gradient norms.
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
    /// Examples whose source and reference slots were exchanged.
    pub switches: u64,
    /// Examples eligible for switching (one draw each, every epoch).
    pub switch_trials: u64,
}

/// Trains with the encoder described by `spec`.
pub fn train(data: TrainData<'_>, config: &ModelConfig, spec: &ProviderSpec) -> Result<TrainOutcome> {
    let encoder = spec.instantiate(config.embed_dim, corpus_texts(data))?;
    train_with(data, config, spec.clone(), encoder, &mut |_| {})
}

fn corpus_texts(data: TrainData<'_>) -> Vec<&str> {
    let mut out = Vec::new();
    match data {
        TrainData::Segments(rs) => {
            for r in rs {
                out.push(r.source.as_str());
                out.push(r.hypothesis.as_str());
                out.extend(r.references.iter().map(String::as_str));
            }
        }
        TrainData::Darr(ts) => {
            for t in ts {
                out.extend([t.source.as_str(), t.reference.as_str(), t.hyp_better.as_str(), t.hyp_worse.as_str()]);
            }
        }
    }
    out
}

struct EstEx {
    s: usize,
    h: usize,
    r: Option<usize>,
    y: f64,
}

struct RankEx {
    s: usize,
    r: usize,
    pos: usize,
    neg: usize,
}

enum Examples {
    Est(Vec<EstEx>),
    Rank(Vec<RankEx>),
}

impl Examples {
    fn len(&self) -> usize {
        match self {
            Examples::Est(v) => v.len(),
            Examples::Rank(v) => v.len(),
        }
    }
}

#[derive(Default)]
struct Interner {
    texts: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn id(&mut self, text: &str) -> usize {
        if let Some(&i) = self.index.get(text) {
            return i;
        }
        let i = self.texts.len();
        self.texts.push(text.to_string());
        self.index.insert(text.to_string(), i);
        i
    }
}

/// Per-layer token means of one text (`layers × dim`), plus the toy trace
/// needed to backpropagate into the encoder.
struct Encoded {
    means: Vec<f64>,
    trace: Option<ToyTrace>,
}

fn layer_means(layers: usize, dim: usize, tokens: usize, get: impl Fn(usize) -> Vec<f64>) -> Vec<f64> {
    let mut out = vec![0.0; layers * dim];
    for l in 0..layers {
        let layer = get(l);
        let dst = &mut out[l * dim..(l + 1) * dim];
        for t in 0..tokens {
            for (o, v) in dst.iter_mut().zip(&layer[t * dim..(t + 1) * dim]) {
                *o += v;
            }
        }
        let inv = 1.0 / tokens as f64;
        dst.iter_mut().for_each(|v| *v *= inv);
    }
    out
}

fn pooled(means: &[f64], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (l, w) in weights.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(&means[l * dim..(l + 1) * dim]) {
            *o += w * v;
        }
    }
    out
}

struct Trainer<'p> {
    dim: usize,
    layers: usize,
    fixed: Option<&'p dyn Provider>,
    texts: Vec<String>,
    /// Cached means when the encoder is fixed.
    cache: Vec<Vec<f64>>,
}

impl Trainer<'_> {
    fn encode(&self, id: usize, toy: Option<&ToyEncoder>) -> Result<Encoded> {
        match toy {
            Some(enc) => {
                let trace = enc.trace(&self.texts[id])?;
                let n = trace.token_ids.len();
                let means = layer_means(self.layers, self.dim, n, |l| trace.acts[l + 1].clone());
                Ok(Encoded {
                    means,
                    trace: Some(trace),
                })
            }
            None => Ok(Encoded {
                means: self.cache[id].clone(),
                trace: None,
            }),
        }
    }

    fn fill_cache(&mut self) -> Result<()> {
        if let Some(p) = self.fixed {
            self.cache = self
                .texts
                .iter()
                .map(|t| {
                    let s = p.encode(t)?;
                    Ok(layer_means(s.num_layers(), s.dim(), s.token_count(), |l| s.layer(l).to_vec()))
                })
                .collect::<Result<_>>()?;
        }
        Ok(())
    }
}

/// Sends `dpooled` back through the layer mix and, for the toy encoder,
/// through its layers.
fn backprop_text(
    enc: &Encoded,
    dpooled: &[f64],
    weights: &[f64],
    dim: usize,
    params: &ModelParams,
    grads: &mut ParamGrads,
) {
    if params.config.learn_layer_mix {
        let g: Vec<f64> = (0..weights.len())
            .map(|l| enc.means[l * dim..(l + 1) * dim].iter().zip(dpooled).map(|(m, d)| m * d).sum())
            .collect();
        let avg: f64 = weights.iter().zip(&g).map(|(w, x)| w * x).sum();
        for l in 0..weights.len() {
            grads.pooling[l] += weights[l] * (g[l] - avg);
        }
    }
    if let (Some(trace), Some(toy), Some(tg)) = (&enc.trace, params.encoder.as_ref(), grads.encoder.as_mut()) {
        let n = trace.token_ids.len();
        let upstream: Vec<Vec<f64>> = weights
            .iter()
            .map(|w| {
                let per_token: Vec<f64> = dpooled.iter().map(|d| w * d / n as f64).collect();
                per_token.iter().cycle().take(n * dim).copied().collect()
            })
            .collect();
        toy.backward(trace, &upstream, tg);
    }
}

/// Trains with an already-built encoder, calling `on_epoch` after every
/// epoch.
pub fn train_with(
    data: TrainData<'_>,
    config: &ModelConfig,
    spec: ProviderSpec,
    encoder: Encoder,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    let provider = encoder.provider();
    if provider.dim() != config.embed_dim {
        return Err(Error::contract(format!(
            "provider `{}` has dim {} but the config says embed_dim = {}",
            provider.id(),
            provider.dim(),
            config.embed_dim
        )));
    }
    let layers = provider.num_layers();
    let dim = config.embed_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut interner = Interner::default();
    let mut target_range = None;
    let examples = match (config.mode, data) {
        (ModelMode::Ranker, TrainData::Darr(tuples)) => {
            if tuples.is_empty() {
                return Err(Error::contract("empty training corpus"));
            }
            Examples::Rank(
                tuples
                    .iter()
                    .map(|t| RankEx {
                        s: interner.id(&t.source),
                        r: interner.id(&t.reference),
                        pos: interner.id(&t.hyp_better),
                        neg: interner.id(&t.hyp_worse),
                    })
                    .collect(),
            )
        }
        (ModelMode::Estimator | ModelMode::QeEstimator, TrainData::Segments(records)) => {
            if records.is_empty() {
                return Err(Error::contract("empty training corpus"));
            }
            let mut ys = Vec::with_capacity(records.len());
            for r in records {
                match r.human_score {
                    Some(y) if y.is_finite() => ys.push(y),
                    _ => return Err(Error::contract(format!("record `{}` has no human score", r.id))),
                }
            }
            let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            target_range = Some((lo, hi));
            let norm = |y: f64| if hi > lo { (y - lo) / (hi - lo) } else { 0.5 };
            let mut out = Vec::with_capacity(records.len());
            for (rec, y) in records.iter().zip(ys) {
                let r = if config.mode == ModelMode::Estimator {
                    let reference = rec
                        .primary_reference()
                        .ok_or_else(|| Error::contract(format!("record `{}` has no reference", rec.id)))?;
                    Some(interner.id(reference))
                } else {
                    None
                };
                out.push(EstEx {
                    s: interner.id(&rec.source),
                    h: interner.id(&rec.hypothesis),
                    r,
                    y: norm(y),
                });
            }
            Examples::Est(out)
        }
        (ModelMode::Ranker, _) => return Err(Error::contract("the ranker trains on DARR tuples")),
        (_, _) => return Err(Error::contract("estimators train on scored segments, not DARR tuples")),
    };

    let (fixed, toy) = match encoder {
        Encoder::Fixed(p) => (Some(p), None),
        Encoder::Toy(t) => (None, Some(t)),
    };
    let mut params = ModelParams::init(config, spec, layers, toy, &mut rng)?;
    params.target_range = target_range;
    let mut trainer = Trainer {
        dim,
        layers,
        fixed: fixed.as_deref(),
        texts: interner.texts,
        cache: Vec::new(),
    };
    trainer.fill_cache()?;

    let encoder_layers = params.encoder.as_ref().map_or(0, |e| e.layers.len());
    let groups: BTreeMap<String, f64> = lr_groups(config, encoder_layers).into_iter().collect();
    let mut optimizer = Optimizer::new(config.optimizer);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let (mut switches, mut trials) = (0u64, 0u64);
    let can_switch = config.mode == ModelMode::Estimator;

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut norm_sq_sum = 0.0;
        let mut steps = 0usize;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let weights = softmax(&params.pooling_logits);
            let mut grads = ParamGrads::zeros_like(&params);
            let scale = 1.0 / batch.len() as f64;
            let toy = params.encoder.as_ref();
            match &examples {
                Examples::Est(exs) => {
                    let Head::Ffn(ffn) = &params.head else { unreachable!() };
                    for &i in batch {
                        let ex = &exs[i];
                        let mut switched = false;
                        if can_switch {
                            trials += 1;
                            switched = rng.random::<f64>() < config.switch_prob;
                            switches += u64::from(switched);
                        }
                        let (a_id, b_id) = match (switched, ex.r) {
                            (true, Some(r)) => (r, Some(ex.s)),
                            (_, r) => (ex.s, r),
                        };
                        let ea = trainer.encode(a_id, toy)?;
                        let eh = trainer.encode(ex.h, toy)?;
                        let eb = b_id.map(|id| trainer.encode(id, toy)).transpose()?;
                        let pa = pooled(&ea.means, &weights, dim);
                        let ph = pooled(&eh.means, &weights, dim);
                        let pb = eb.as_ref().map(|e| pooled(&e.means, &weights, dim));
                        let x = raw_features(&pa, &ph, pb.as_deref(), config.extra_features);
                        let cache = ffn.forward_train(&x, config.dropout_rate, &mut rng)?;
                        let dout = 2.0 * (cache.out - ex.y) * scale;
                        let Head::Ffn(gffn) = &mut grads.head else { unreachable!() };
                        let dx = ffn.backward(&cache, dout, gffn);
                        if config.learn_layer_mix || toy.is_some() {
                            let (da, dh, db) = features_backward(&pa, &ph, pb.as_deref(), config.extra_features, &dx);
                            backprop_text(&ea, &da, &weights, dim, &params, &mut grads);
                            backprop_text(&eh, &dh, &weights, dim, &params, &mut grads);
                            if let Some(eb) = &eb {
                                backprop_text(eb, &db, &weights, dim, &params, &mut grads);
                            }
                        }
                    }
                }
                Examples::Rank(exs) => {
                    let Head::Projection(proj) = &params.head else { unreachable!() };
                    for &i in batch {
                        let ex = &exs[i];
                        let enc: Vec<Encoded> = [ex.s, ex.r, ex.pos, ex.neg]
                            .iter()
                            .map(|&id| trainer.encode(id, toy))
                            .collect::<Result<_>>()?;
                        let p: Vec<Vec<f64>> = enc.iter().map(|e| pooled(&e.means, &weights, dim)).collect();
                        let view = TripletView {
                            s: &p[0],
                            r: &p[1],
                            pos: &p[2],
                            neg: &p[3],
                        };
                        let Head::Projection(gproj) = &mut grads.head else { unreachable!() };
                        let (_, g) = triplet_backward(proj, view, config.margin, scale, gproj)?;
                        if config.learn_layer_mix || toy.is_some() {
                            for (e, d) in enc.iter().zip([&g.ds, &g.dr, &g.dpos, &g.dneg]) {
                                backprop_text(e, d, &weights, dim, &params, &mut grads);
                            }
                        }
                    }
                }
            }
            let norm = grads.norm();
            if !norm.is_finite() {
                return Err(Error::numeric(
                    format!("epoch {epoch}, step {}", b + 1),
                    "non-finite gradient",
                ));
            }
            norm_sq_sum += norm * norm;
            steps += 1;
            optimizer.apply(&mut params, &grads);
        }
        let loss = epoch_loss(&trainer, &params, &examples)?;
        if !loss.is_finite() {
            return Err(Error::numeric(format!("epoch {epoch}"), "non-finite training loss"));
        }
        let entry = EpochLog {
            epoch,
            loss,
            lr_groups: groups.clone(),
            wall_ms: start.elapsed().as_millis() as u64,
            grad_norm: (norm_sq_sum / steps.max(1) as f64).sqrt(),
        };
        on_epoch(&entry);
        log.push(entry);
    }
    if !params.all_finite() {
        return Err(Error::numeric("final parameters", "non-finite parameter"));
    }
    Ok(TrainOutcome {
        params,
        log,
        switches,
        switch_trials: trials,
    })
}

/// Evaluation-mode loss over the whole training set, without switching.
fn epoch_loss(trainer: &Trainer<'_>, params: &ModelParams, examples: &Examples) -> Result<f64> {
    let weights = softmax(&params.pooling_logits);
    let dim = trainer.dim;
    let toy = params.encoder.as_ref();
    let mut memo: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut get = |id: usize| -> Result<Vec<f64>> {
        if let Some(v) = memo.get(&id) {
            return Ok(v.clone());
        }
        let v = pooled(&trainer.encode(id, toy)?.means, &weights, dim);
        memo.insert(id, v.clone());
        Ok(v)
    };
    let mut sum = 0.0;
    match examples {
        Examples::Est(exs) => {
            let ffn = params.ffn()?;
            for ex in exs {
                let pa = get(ex.s)?;
                let ph = get(ex.h)?;
                let pb = ex.r.map(&mut get).transpose()?;
                let x = raw_features(&pa, &ph, pb.as_deref(), params.config.extra_features);
                sum += (ffn.forward(&x)? - ex.y).powi(2);
            }
            Ok(sum / exs.len() as f64)
        }
        Examples::Rank(exs) => {
            let proj = params.projection()?;
            for ex in exs {
                let ps = proj.apply(&get(ex.s)?)?;
                let pr = proj.apply(&get(ex.r)?)?;
                let pp = proj.apply(&get(ex.pos)?)?;
                let pn = proj.apply(&get(ex.neg)?)?;
                use super::ranker::euclid;
                sum += triplet_hinge(
                    euclid(&ps, &pp),
                    euclid(&ps, &pn),
                    euclid(&pr, &pp),
                    euclid(&pr, &pn),
                    params.config.margin,
                );
            }
            Ok(sum / exs.len() as f64)
        }
    }
}
