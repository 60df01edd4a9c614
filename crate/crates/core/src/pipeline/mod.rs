//! Config-driven runs: ingest, train, score and evaluate.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_all, cmd_evaluate, cmd_ingest, cmd_score, cmd_train, evaluate_report, meta_path, rejects_path, with_pool,
    write_snapshot, EvaluateSummary, IngestSummary, ScoreMeta, ScoreSummary, TrainSummary,
};
pub use config::{set_path, EvaluateConfig, IngestConfig, RunConfig, ScoreConfig, TrainConfig, CACHE_DIR_ENV};
