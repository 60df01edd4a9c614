//! Per-group learning rates and the parameter update.

use std::collections::HashMap;

use super::config::{ModelConfig, OptimizerKind};
use super::params::{ModelParams, ParamGrads};
use crate::encoder::Provider;

/// `(group name, learning rate)` in update order: head, pooling, encoder
/// layers from the top down, then the embedding table. Frozen or absent
/// groups are omitted.
pub fn lr_groups(config: &ModelConfig, encoder_layers: usize) -> Vec<(String, f64)> {
    let mut out = vec![("head".to_string(), config.lr_base)];
    if config.learn_layer_mix {
        out.push(("pooling".to_string(), config.lr_base));
    }
    for k in 0..encoder_layers {
        out.push((format!("encoder.layer{k}"), config.lr_base * config.layer_decay.powi(k as i32)));
    }
    if encoder_layers > 0 && !config.freeze_embeddings {
        out.push((
            "embeddings".to_string(),
            config.lr_base * config.layer_decay.powi(encoder_layers as i32),
        ));
    }
    out
}

/// Plain gradient descent by default; Adam when configured.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    steps: u64,
    moments: HashMap<String, (Vec<f64>, Vec<f64>)>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer {
            kind,
            steps: 0,
            moments: HashMap::new(),
        }
    }

    fn update(&mut self, key: &str, lr: f64, param: &mut [f64], grad: &[f64], offset: usize, full_len: usize) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in param.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let (m, v) = self
                    .moments
                    .entry(key.to_string())
                    .or_insert_with(|| (vec![0.0; full_len], vec![0.0; full_len]));
                let t = self.steps as i32;
                let c1 = 1.0 - BETA1.powi(t);
                let c2 = 1.0 - BETA2.powi(t);
                for (i, (p, g)) in param.iter_mut().zip(grad).enumerate() {
                    let j = offset + i;
                    m[j] = BETA1 * m[j] + (1.0 - BETA1) * g;
                    v[j] = BETA2 * v[j] + (1.0 - BETA2) * g * g;
                    *p -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + EPS);
                }
            }
        }
    }

    /// One update of every trainable group, then bumps the step counter.
    pub fn apply(&mut self, params: &mut ModelParams, grads: &ParamGrads) {
        self.steps += 1;
        let cfg = params.config.clone();
        let lr = cfg.lr_base;
        for ((name, p), (_, g)) in params.head.tensors_mut().into_iter().zip(grads.head.tensors()) {
            let n = p.len();
            self.update(name, lr, p, g, 0, n);
        }
        if cfg.learn_layer_mix {
            let n = params.pooling_logits.len();
            self.update("pooling", lr, &mut params.pooling_logits, &grads.pooling, 0, n);
        }
        if let (Some(enc), Some(g)) = (params.encoder.as_mut(), grads.encoder.as_ref()) {
            let n_layers = enc.layers.len();
            for (i, (layer, gl)) in enc.layers.iter_mut().zip(&g.layers).enumerate() {
                let k = (n_layers - 1 - i) as i32;
                let lr_k = lr * cfg.layer_decay.powi(k);
                let (nw, nb) = (layer.w.len(), layer.b.len());
                self.update(&format!("encoder.{i}.w"), lr_k, &mut layer.w, &gl.w, 0, nw);
                self.update(&format!("encoder.{i}.b"), lr_k, &mut layer.b, &gl.b, 0, nb);
            }
            if !cfg.freeze_embeddings {
                let lr_e = lr * cfg.layer_decay.powi(n_layers as i32);
                let d = enc.dim();
                let full = enc.embedding.len();
                for (&row, grow) in &g.embedding {
                    let slice = &mut enc.embedding[row * d..(row + 1) * d];
                    self.update("encoder.embedding", lr_e, slice, grow, row * d, full);
                }
            }
        }
        params.training_step += 1;
    }
}
