use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Kind of human judgement attached to a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScoreKind {
    Da,
    DaZ,
    Hter,
    Mqm,
    #[default]
    None,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Da => "DA",
            ScoreKind::DaZ => "DA_Z",
            ScoreKind::Hter => "HTER",
            ScoreKind::Mqm => "MQM",
            ScoreKind::None => "NONE",
        }
    }

    /// Checks the value range the kind admits.
    pub fn admits(self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match self {
            ScoreKind::Hter => value >= 0.0,
            ScoreKind::Mqm => (0.0..=100.0).contains(&value),
            ScoreKind::Da | ScoreKind::DaZ | ScoreKind::None => true,
        }
    }

    /// HTER counts edits, so a smaller value is a better translation.
    pub fn lower_is_better(self) -> bool {
        matches!(self, ScoreKind::Hter)
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "DA" => Ok(ScoreKind::Da),
            "DA_Z" | "DAZ" | "Z" => Ok(ScoreKind::DaZ),
            "HTER" => Ok(ScoreKind::Hter),
            "MQM" => Ok(ScoreKind::Mqm),
            "NONE" | "" => Ok(ScoreKind::None),
            other => Err(Error::contract(format!("unknown score kind `{other}`"))),
        }
    }
}

/// One evaluation unit: a hypothesis for a source segment with its
/// references and an optional human judgement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub id: String,
    pub lang_pair: String,
    pub source: String,
    pub hypothesis: String,
    pub references: Vec<String>,
    pub human_score: Option<f64>,
    pub score_kind: ScoreKind,
    pub system_id: String,
    pub doc_id: Option<String>,
    pub seg_index: Option<u64>,
    /// 1-based line in the file the record came from, when known.
    #[serde(skip)]
    pub line: Option<u64>,
}

impl SegmentRecord {
    /// Minimal record used by tests and synthetic generators.
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        hypothesis: impl Into<String>,
        references: Vec<String>,
    ) -> Self {
        SegmentRecord {
            id: id.into(),
            lang_pair: "xx-yy".to_string(),
            source: source.into(),
            hypothesis: hypothesis.into(),
            references,
            human_score: None,
            score_kind: ScoreKind::None,
            system_id: "system".to_string(),
            doc_id: None,
            seg_index: None,
            line: None,
        }
    }

    pub fn primary_reference(&self) -> Option<&str> {
        self.references.first().map(String::as_str)
    }
}

/// A relative-ranking judgement: `hyp_better` was preferred to `hyp_worse`
/// for the same source.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DarrTuple {
    pub source: String,
    pub reference: String,
    pub hyp_better: String,
    pub hyp_worse: String,
    pub lang_pair: String,
}

/// A row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: Option<u64>,
    pub id: Option<String>,
    pub reason: String,
    pub raw: String,
}
