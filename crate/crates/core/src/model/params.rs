use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, ModelMode};
use super::ffn::Ffn;
use super::ranker::Projection;
use crate::corpus::Tokenizer;
use crate::encoder::{HashedProvider, PoolingSpec, Provider, RemoteConfig, SegmentEmbedding, ToyEncoder, ToyGrads};
use crate::error::{Error, Result};

/// How to obtain the encoder a model was trained with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSpec {
    Hashed {
        dim: usize,
        layers: usize,
        seed: u64,
        #[serde(default)]
        lowercase: bool,
    },
    /// Vocabulary is built from the training corpus; the weights live in
    /// the model parameters.
    Toy {
        layers: usize,
        seed: u64,
        #[serde(default)]
        lowercase: bool,
    },
    Remote(RemoteConfig),
}

impl ProviderSpec {
    pub fn hashed(dim: usize, layers: usize, seed: u64) -> Self {
        ProviderSpec::Hashed {
            dim,
            layers,
            seed,
            lowercase: false,
        }
    }

    /// Builds the encoder for training. `texts` seeds the toy vocabulary
    /// and is ignored by the other kinds.
    pub fn instantiate<'a>(&self, dim: usize, texts: impl IntoIterator<Item = &'a str>) -> Result<Encoder> {
        match self {
            ProviderSpec::Hashed {
                dim,
                layers,
                seed,
                lowercase,
            } => Ok(Encoder::Fixed(Arc::new(HashedProvider::with_tokenizer(
                *dim,
                *layers,
                *seed,
                Tokenizer { lowercase: *lowercase },
            )?))),
            ProviderSpec::Toy { layers, seed, lowercase } => Ok(Encoder::Toy(ToyEncoder::build(
                texts,
                dim,
                *layers,
                *seed,
                Tokenizer { lowercase: *lowercase },
            )?)),
            ProviderSpec::Remote(cfg) => remote_provider(cfg).map(Encoder::Fixed),
        }
    }
}

#[cfg(feature = "http")]
fn remote_provider(cfg: &RemoteConfig) -> Result<Arc<dyn Provider>> {
    Ok(Arc::new(crate::encoder::RemoteProvider::connect(cfg.clone())?))
}

#[cfg(not(feature = "http"))]
fn remote_provider(_cfg: &RemoteConfig) -> Result<Arc<dyn Provider>> {
    Err(Error::contract("this build has no HTTP support for remote providers"))
}

/// The encoder handed to the training loop.
pub enum Encoder {
    /// Not updated by training.
    Fixed(Arc<dyn Provider>),
    /// Layers (and optionally the embedding table) are trained.
    Toy(ToyEncoder),
}

impl Encoder {
    pub fn provider(&self) -> &dyn Provider {
        match self {
            Encoder::Fixed(p) => p.as_ref(),
            Encoder::Toy(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Ffn(Ffn),
    Projection(Projection),
}

impl Head {
    pub fn zeros_like(&self) -> Self {
        match self {
            Head::Ffn(f) => Head::Ffn(f.zeros_like()),
            Head::Projection(p) => Head::Projection(p.zeros_like()),
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        match self {
            Head::Ffn(f) => f.tensors(),
            Head::Projection(p) => vec![("proj.w", &p.w)],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        match self {
            Head::Ffn(f) => f.tensors_mut(),
            Head::Projection(p) => vec![("proj.w", &mut p.w)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub provider: ProviderSpec,
    pub head: Head,
    /// Softmax logits of the pooling layer mix, one per encoder layer.
    pub pooling_logits: Vec<f64>,
    pub encoder: Option<ToyEncoder>,
    /// `(min, max)` of the raw training targets; predictions live in the
    /// normalized `[0, 1]` space.
    pub target_range: Option<(f64, f64)>,
    pub training_step: u64,
}

/// Gradients with the same layout as [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub head: Head,
    pub pooling: Vec<f64>,
    pub encoder: Option<ToyGrads>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ParamGrads {
            head: params.head.zeros_like(),
            pooling: vec![0.0; params.pooling_logits.len()],
            encoder: params.encoder.as_ref().map(ToyGrads::zeros),
        }
    }

    /// Global L2 norm over every gradient entry.
    pub fn norm(&self) -> f64 {
        let mut sq: f64 = self.head.tensors().iter().flat_map(|(_, t)| t.iter()).map(|g| g * g).sum();
        sq += self.pooling.iter().map(|g| g * g).sum::<f64>();
        if let Some(e) = &self.encoder {
            sq += e.embedding.values().flatten().map(|g| g * g).sum::<f64>();
            sq += e.layers.iter().flat_map(|l| l.w.iter().chain(&l.b)).map(|g| g * g).sum::<f64>();
        }
        sq.sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.head.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= factor);
        }
        self.pooling.iter_mut().for_each(|g| *g *= factor);
        if let Some(e) = &mut self.encoder {
            e.embedding.values_mut().flatten().for_each(|g| *g *= factor);
            for l in &mut e.layers {
                l.w.iter_mut().chain(l.b.iter_mut()).for_each(|g| *g *= factor);
            }
        }
    }
}

impl ModelParams {
    /// Fresh parameters: random feed-forward weights (or an identity
    /// projection for the ranker) and a uniform layer mix.
    pub fn init(
        config: &ModelConfig,
        provider: ProviderSpec,
        num_layers: usize,
        encoder: Option<ToyEncoder>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        if num_layers == 0 {
            return Err(Error::contract("the encoder must expose at least one layer"));
        }
        let head = match config.mode {
            ModelMode::Ranker => Head::Projection(Projection::identity(config.embed_dim)),
            _ => Head::Ffn(Ffn::init(config.input_dim(), config.hidden1, config.hidden2, rng)),
        };
        Ok(ModelParams {
            config: config.clone(),
            provider,
            head,
            pooling_logits: vec![0.0; num_layers],
            encoder,
            target_range: None,
            training_step: 0,
        })
    }

    pub fn fingerprint(&self) -> String {
        self.config.fingerprint()
    }

    pub fn mode(&self) -> ModelMode {
        self.config.mode
    }

    pub fn pooling_spec(&self) -> PoolingSpec {
        PoolingSpec::from_logits(&self.pooling_logits).expect("at least one layer")
    }

    pub fn ffn(&self) -> Result<&Ffn> {
        match &self.head {
            Head::Ffn(f) => Ok(f),
            Head::Projection(_) => Err(Error::contract("ranker parameters have no regression head")),
        }
    }

    pub fn projection(&self) -> Result<&Projection> {
        match &self.head {
            Head::Projection(p) => Ok(p),
            Head::Ffn(_) => Err(Error::contract("estimator parameters have no ranking projection")),
        }
    }

    /// The provider to score with: rebuilt from the spec, or the trained
    /// toy encoder.
    pub fn build_provider(&self) -> Result<Arc<dyn Provider>> {
        match (&self.provider, &self.encoder) {
            (ProviderSpec::Toy { .. }, Some(enc)) => Ok(Arc::new(enc.clone())),
            (ProviderSpec::Toy { .. }, None) => Err(Error::contract("toy provider without encoder weights")),
            (spec, _) => match spec.instantiate(self.config.embed_dim, std::iter::empty())? {
                Encoder::Fixed(p) => Ok(p),
                Encoder::Toy(t) => Ok(Arc::new(t)),
            },
        }
    }

    /// Errors unless `provider` produces embeddings this model can consume.
    pub fn check_provider(&self, provider: &dyn Provider) -> Result<()> {
        if provider.dim() != self.config.embed_dim {
            return Err(Error::contract(format!(
                "provider `{}` has dim {} but the model expects {}",
                provider.id(),
                provider.dim(),
                self.config.embed_dim
            )));
        }
        if provider.num_layers() != self.pooling_logits.len() {
            return Err(Error::contract(format!(
                "provider `{}` has {} layers but the model pools {}",
                provider.id(),
                provider.num_layers(),
                self.pooling_logits.len()
            )));
        }
        Ok(())
    }

    /// Encodes and pools one text.
    pub fn embed(&self, provider: &dyn Provider, text: &str) -> Result<SegmentEmbedding> {
        crate::encoder::embed(provider, text, &self.pooling_spec())
    }

    pub fn all_finite(&self) -> bool {
        let head = self.head.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()));
        let pool = self.pooling_logits.iter().all(|v| v.is_finite());
        let enc = self.encoder.as_ref().is_none_or(|e| {
            e.embedding.iter().all(|v| v.is_finite())
                && e.layers.iter().all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
        });
        head && pool && enc
    }
}
