//! Corpus data model and ingestion: DA, DARR, HTER and MQM flavours.

pub mod darr;
pub mod hter;
pub mod record;
pub mod ter;
pub mod tokenize;
pub mod tsv;

pub use darr::{da_to_darr, DEFAULT_DARR_THRESHOLD};
pub use hter::build_hter_corpus;
pub use record::{DarrTuple, Reject, ScoreKind, SegmentRecord};
pub use ter::{compute_ter, compute_ter_with, levenshtein, TerOptions, TerScore};
pub use tokenize::Tokenizer;
pub use tsv::{parse_corpus, parse_corpus_bytes, CorpusData, CorpusFormat, ParseOptions, ParsedCorpus};
