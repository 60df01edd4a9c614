//! Estimator and ranker heads, their training loop and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod features;
pub mod ffn;
pub mod loss;
pub mod optim;
pub mod params;
pub mod ranker;
pub mod train;

pub use checkpoint::{load_params, save_params, CHECKPOINT_FORMAT_VERSION};
pub use config::{qe_hidden, Activation, ModelConfig, ModelMode, OptimizerKind};
pub use features::feature_vector;
pub use ffn::Ffn;
pub use loss::{
    estimator_loss, estimator_loss_grad, forward, predict, ranker_loss, ranker_loss_grad, ranker_score,
    EstimatorGrads, EstimatorItem, RankerItem, TrainBatch,
};
pub use optim::{lr_groups, Optimizer};
pub use params::{Encoder, Head, ModelParams, ParamGrads, ProviderSpec};
pub use ranker::Projection;
pub use train::{train, train_with, EpochLog, TrainData, TrainOutcome};
