use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelMode {
    Estimator,
    Ranker,
    QeEstimator,
}

impl ModelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelMode::Estimator => "ESTIMATOR",
            ModelMode::Ranker => "RANKER",
            ModelMode::QeEstimator => "QE_ESTIMATOR",
        }
    }

    pub fn is_estimator(self) -> bool {
        !matches!(self, ModelMode::Ranker)
    }
}

impl std::str::FromStr for ModelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "ESTIMATOR" => Ok(ModelMode::Estimator),
            "RANKER" => Ok(ModelMode::Ranker),
            "QE_ESTIMATOR" | "QE" => Ok(ModelMode::QeEstimator),
            _ => Err(Error::contract(format!("unknown model mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Activation {
    #[default]
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    /// Adam with the usual (0.9, 0.999, 1e-8) constants; off by default.
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mode: ModelMode,
    pub embed_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    #[serde(default)]
    pub activation: Activation,
    pub dropout_rate: f64,
    pub lr_base: f64,
    pub layer_decay: f64,
    pub freeze_embeddings: bool,
    pub switch_prob: f64,
    pub margin: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Append `|a−h|` and `a⊙h` for each anchor slot to the concatenation.
    #[serde(default)]
    pub extra_features: bool,
    /// Train the softmax layer mix of the pooling layer.
    #[serde(default)]
    pub learn_layer_mix: bool,
    #[serde(default)]
    pub optimizer: OptimizerKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::estimator(32)
    }
}

/// Scales a hidden size by 2/3 and rounds down to an even number.
pub fn qe_hidden(h: usize) -> usize {
    (h * 2 / 3) / 2 * 2
}

impl ModelConfig {
    /// The desk-scale estimator: hidden sizes 3d and 1.5d.
    pub fn estimator(embed_dim: usize) -> Self {
        ModelConfig {
            mode: ModelMode::Estimator,
            embed_dim,
            hidden1: 3 * embed_dim,
            hidden2: 3 * embed_dim / 2,
            activation: Activation::Tanh,
            dropout_rate: 0.1,
            lr_base: 0.03,
            layer_decay: 0.95,
            freeze_embeddings: true,
            switch_prob: 0.5,
            margin: 1.0,
            epochs: 40,
            batch_size: 32,
            seed: 42,
            extra_features: false,
            learn_layer_mix: false,
            optimizer: OptimizerKind::Sgd,
        }
    }

    /// The estimator without a reference slot, with proportionally smaller
    /// hidden layers.
    pub fn qe(embed_dim: usize) -> Self {
        let base = ModelConfig::estimator(embed_dim);
        ModelConfig {
            mode: ModelMode::QeEstimator,
            hidden1: qe_hidden(base.hidden1),
            hidden2: qe_hidden(base.hidden2),
            ..base
        }
    }

    pub fn ranker(embed_dim: usize) -> Self {
        ModelConfig {
            mode: ModelMode::Ranker,
            lr_base: 0.01,
            epochs: 10,
            ..ModelConfig::estimator(embed_dim)
        }
    }

    pub fn for_mode(mode: ModelMode, embed_dim: usize) -> Self {
        match mode {
            ModelMode::Estimator => ModelConfig::estimator(embed_dim),
            ModelMode::QeEstimator => ModelConfig::qe(embed_dim),
            ModelMode::Ranker => ModelConfig::ranker(embed_dim),
        }
    }

    /// Width of the feed-forward input; zero for the ranker, which has no
    /// feed-forward head.
    pub fn input_dim(&self) -> usize {
        let d = self.embed_dim;
        let extra = if self.extra_features { 2 } else { 0 };
        match self.mode {
            ModelMode::Estimator => 3 * d + 2 * extra * d,
            ModelMode::QeEstimator => 2 * d + extra * d,
            ModelMode::Ranker => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::contract(format!("invalid model config: {m}")));
        if self.embed_dim == 0 {
            return fail("embed_dim must be positive");
        }
        if self.mode.is_estimator() && !(self.hidden1 > self.hidden2 && self.hidden2 > 1) {
            return fail("need hidden1 > hidden2 > 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail("dropout_rate must lie in [0, 1)");
        }
        if !(self.lr_base.is_finite() && self.lr_base > 0.0) {
            return fail("lr_base must be positive");
        }
        if !(self.layer_decay > 0.0 && self.layer_decay <= 1.0) {
            return fail("layer_decay must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.switch_prob) {
            return fail("switch_prob must lie in [0, 1]");
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return fail("margin must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch_size must be positive");
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the config's JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        crate::fsio::short_sha256(json.as_bytes())
    }
}
