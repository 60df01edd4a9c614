//! Segment, document and system scoring.

pub mod aggregate;
pub mod output;
pub mod scorer;

pub use aggregate::{aggregate, doc_average, system_average, DocScore};
pub use output::{docs_to_tsv, scores_to_jsonl, scores_to_tsv, write_scores, ScoreRow};
pub use scorer::{
    six_permutations, PermutationScore, Prediction, ScoreOptions, Scorer, ScoringMode, WeightRule,
};
