//! Finite-difference gradient checks shared by the model tests and the
//! acceptance suite.

use mteval_core::encoder::SegmentEmbedding;
use mteval_core::model::{
    estimator_loss, estimator_loss_grad, ranker_loss_grad, EstimatorItem, Head, ModelConfig, ModelMode, ModelParams,
    ProviderSpec, RankerItem, TrainBatch,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
/// Denominator floor for gradients that are numerically zero.
pub const FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn emb(rng: &mut ChaCha8Rng, d: usize) -> SegmentEmbedding {
    SegmentEmbedding::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect(), "p").unwrap()
}

fn small_config(mode: ModelMode, rng: &mut ChaCha8Rng) -> ModelConfig {
    let mut cfg = ModelConfig::for_mode(mode, 8);
    cfg.hidden1 = 16;
    cfg.hidden2 = 8;
    cfg.extra_features = mode != ModelMode::Ranker && rng.random_bool(0.5);
    cfg.margin = rng.random_range(0.1..1.5);
    cfg
}

fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + STEP) - f(x - STEP)) / (2.0 * STEP)
}

/// Largest relative error over every head parameter and every input
/// coordinate of one random estimator batch.
pub fn estimator_max_rel_err(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mode = if rng.random_bool(0.5) { ModelMode::Estimator } else { ModelMode::QeEstimator };
    let cfg = small_config(mode, &mut rng);
    let params = ModelParams::init(&cfg, ProviderSpec::hashed(8, 1, 0), 1, None, &mut rng).unwrap();
    let n = rng.random_range(1..=4);
    let items: Vec<EstimatorItem> = (0..n)
        .map(|_| EstimatorItem {
            source: emb(&mut rng, 8),
            hypothesis: emb(&mut rng, 8),
            reference: (mode == ModelMode::Estimator).then(|| emb(&mut rng, 8)),
            target: rng.random(),
        })
        .collect();
    let batch = TrainBatch::Estimator(items.clone());
    let (_, grads) = estimator_loss_grad(&batch, &params).unwrap();
    let mut worst: f64 = 0.0;

    let analytic: Vec<Vec<f64>> = grads.head.tensors().iter().map(|(_, t)| t.to_vec()).collect();
    for (ti, g) in analytic.iter().enumerate() {
        for (j, &a) in g.iter().enumerate() {
            let num = central(
                |v| {
                    let mut p = params.clone();
                    p.head.tensors_mut()[ti].1[j] = v;
                    estimator_loss(&batch, &p).unwrap()
                },
                params.head.tensors()[ti].1[j],
            );
            worst = worst.max(rel_err(a, num));
        }
    }

    for (i, (ds, dh, dr)) in grads.inputs.iter().enumerate() {
        for (slot, g) in [ds, dh, dr].into_iter().enumerate() {
            for (j, &a) in g.iter().enumerate() {
                let num = central(
                    |v| {
                        let mut its = items.clone();
                        let target = match slot {
                            0 => &mut its[i].source,
                            1 => &mut its[i].hypothesis,
                            _ => its[i].reference.as_mut().unwrap(),
                        };
                        let mut vec = target.vector().to_vec();
                        vec[j] = v;
                        *target = SegmentEmbedding::new(vec, "p").unwrap();
                        estimator_loss(&TrainBatch::Estimator(its), &params).unwrap()
                    },
                    {
                        let it = &items[i];
                        match slot {
                            0 => it.source.vector()[j],
                            1 => it.hypothesis.vector()[j],
                            _ => it.reference.as_ref().unwrap().vector()[j],
                        }
                    },
                );
                worst = worst.max(rel_err(a, num));
            }
        }
    }
    worst
}

/// Largest relative error over the projection entries of one random ranker
/// batch.
pub fn ranker_max_rel_err(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = small_config(ModelMode::Ranker, &mut rng);
    let mut params = ModelParams::init(&cfg, ProviderSpec::hashed(8, 1, 0), 1, None, &mut rng).unwrap();
    if let Head::Projection(p) = &mut params.head {
        for w in &mut p.w {
            *w += rng.random_range(-0.3..0.3);
        }
    }
    let n = rng.random_range(1..=4);
    let items: Vec<RankerItem> = (0..n)
        .map(|_| RankerItem {
            source: emb(&mut rng, 8),
            reference: emb(&mut rng, 8),
            better: emb(&mut rng, 8),
            worse: emb(&mut rng, 8),
        })
        .collect();
    let batch = TrainBatch::Ranker(items);
    let (_, grad) = ranker_loss_grad(&batch, &params).unwrap();
    let Head::Projection(g) = grad else { unreachable!() };
    let mut worst: f64 = 0.0;
    for (j, &a) in g.w.iter().enumerate() {
        let num = central(
            |v| {
                let mut p = params.clone();
                if let Head::Projection(pr) = &mut p.head {
                    pr.w[j] = v;
                }
                ranker_loss_grad(&batch, &p).unwrap().0
            },
            params.projection().unwrap().w[j],
        );
        worst = worst.max(rel_err(a, num));
    }
    worst
}
