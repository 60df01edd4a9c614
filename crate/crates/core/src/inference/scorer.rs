use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, doc_average, system_average, DocScore};
use crate::corpus::{SegmentRecord, Tokenizer};
use crate::encoder::{pool, Provider, SegmentEmbedding};
use crate::error::{Error, Result};
use crate::model::{predict, ranker_score, ModelMode, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScoringMode {
    #[default]
    SingleRef,
    MultiRef,
    Qe,
}

impl ScoringMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoringMode::SingleRef => "SINGLE_REF",
            ScoringMode::MultiRef => "MULTI_REF",
            ScoringMode::Qe => "QE",
        }
    }
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "SINGLE_REF" | "SINGLE" => Ok(ScoringMode::SingleRef),
            "MULTI_REF" | "MULTI" => Ok(ScoringMode::MultiRef),
            "QE" => Ok(ScoringMode::Qe),
            _ => Err(Error::contract(format!("unknown scoring mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationScore {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub stdev: f64,
    #[serde(rename = "final")]
    pub final_score: f64,
    pub permutation_scores: Vec<PermutationScore>,
    pub mode: ScoringMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub mode: ScoringMode,
    /// In single-reference mode, also score `[r;h;s]` and aggregate the two.
    pub two_permutations: bool,
}

/// What counts as a segment's length for document micro-averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    #[default]
    HypTokens,
    RefTokens,
    Chars,
    Uniform,
}

impl FromStr for WeightRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "hyp-tokens" | "hyp" => Ok(WeightRule::HypTokens),
            "ref-tokens" | "ref" => Ok(WeightRule::RefTokens),
            "chars" => Ok(WeightRule::Chars),
            "uniform" => Ok(WeightRule::Uniform),
            _ => Err(Error::contract(format!("unknown weight rule `{s}`"))),
        }
    }
}

impl WeightRule {
    pub fn weight(self, record: &SegmentRecord) -> Result<f64> {
        let tok = Tokenizer::default();
        Ok(match self {
            WeightRule::HypTokens => tok.count(&record.hypothesis) as f64,
            WeightRule::RefTokens => {
                let r = record
                    .primary_reference()
                    .ok_or_else(|| Error::contract(format!("record `{}` has no reference to weigh by", record.id)))?;
                tok.count(r) as f64
            }
            WeightRule::Chars => record.hypothesis.chars().count() as f64,
            WeightRule::Uniform => 1.0,
        })
    }
}

/// Scores segments with fixed parameters and provider.
pub struct Scorer<'a> {
    params: &'a ModelParams,
    provider: Arc<dyn Provider>,
}

/// Slot pattern: `(label, first anchor, second anchor)` as reference
/// indices, where 0 is the source and `k ≥ 1` is reference `k`.
type Pattern = (String, usize, usize);

fn slot_name(i: usize) -> String {
    match i {
        0 => "s".to_string(),
        1 => "r".to_string(),
        k => format!("r{k}"),
    }
}

fn pattern(a: usize, b: usize) -> Pattern {
    (format!("{};h;{}", slot_name(a), slot_name(b)), a, b)
}

/// The six slot patterns pairing the primary reference with reference `k`.
pub fn six_permutations(k: usize) -> Vec<(String, usize, usize)> {
    vec![
        pattern(0, 1),
        pattern(1, 0),
        pattern(0, k),
        pattern(k, 0),
        pattern(1, k),
        pattern(k, 1),
    ]
}

impl<'a> Scorer<'a> {
    /// Uses the provider recorded in the parameters.
    pub fn new(params: &'a ModelParams) -> Result<Self> {
        let provider = params.build_provider()?;
        Self::with_provider(params, provider)
    }

    pub fn with_provider(params: &'a ModelParams, provider: Arc<dyn Provider>) -> Result<Self> {
        params.check_provider(provider.as_ref())?;
        Ok(Scorer { params, provider })
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    pub fn embed(&self, text: &str) -> Result<SegmentEmbedding> {
        self.params.embed(self.provider.as_ref(), text)
    }

    /// Encodes the distinct texts of `texts` in one provider call.
    pub fn embed_many<'t>(&self, texts: impl IntoIterator<Item = &'t str>) -> Result<HashMap<&'t str, SegmentEmbedding>> {
        let mut unique: Vec<&str> = Vec::new();
        let mut seen = HashMap::new();
        for t in texts {
            if seen.insert(t, ()).is_none() {
                unique.push(t);
            }
        }
        let spec = self.params.pooling_spec();
        let stacks = self.provider.encode_batch(&unique)?;
        unique
            .into_iter()
            .zip(stacks)
            .map(|(t, s)| Ok((t, pool(&s, &spec, self.provider.id())?)))
            .collect()
    }

    fn check_mode(&self, record: &SegmentRecord, opts: ScoreOptions) -> Result<()> {
        let model = self.params.mode();
        let n_refs = record.references.len();
        match opts.mode {
            ScoringMode::Qe => {
                if model != ModelMode::QeEstimator {
                    return Err(Error::contract(format!(
                        "QE scoring needs QE_ESTIMATOR parameters, got {}",
                        model.as_str()
                    )));
                }
            }
            ScoringMode::SingleRef | ScoringMode::MultiRef => {
                if model == ModelMode::QeEstimator {
                    return Err(Error::contract("QE_ESTIMATOR parameters only score in QE mode"));
                }
                let need = if opts.mode == ScoringMode::MultiRef { 2 } else { 1 };
                if n_refs < need || record.references.iter().take(need).any(|r| r.trim().is_empty()) {
                    return Err(Error::contract(format!(
                        "record `{}` has {n_refs} reference(s); {} mode needs at least {need}",
                        record.id, opts.mode
                    )));
                }
            }
        }
        Ok(())
    }

    fn slot_score(&self, a: &SegmentEmbedding, h: &SegmentEmbedding, b: Option<&SegmentEmbedding>) -> Result<f64> {
        match (self.params.mode(), b) {
            (ModelMode::Ranker, Some(b)) => ranker_score(a, h, b, self.params),
            _ => predict(self.params, a, h, b),
        }
    }

    fn score_with(&self, record: &SegmentRecord, opts: ScoreOptions, emb: &HashMap<&str, SegmentEmbedding>) -> Result<Prediction> {
        self.check_mode(record, opts)?;
        let get = |t: &str| emb.get(t).ok_or_else(|| Error::contract("text was not encoded"));
        let h = get(&record.hypothesis)?;
        let mut anchors = vec![get(&record.source)?];
        for r in &record.references {
            anchors.push(get(r)?);
        }
        let perm = |(label, a, b): &Pattern| -> Result<PermutationScore> {
            Ok(PermutationScore {
                label: label.clone(),
                score: self.slot_score(anchors[*a], h, Some(anchors[*b]))?,
            })
        };
        let (scores, mean, stdev, final_score) = match opts.mode {
            ScoringMode::Qe => {
                let s = self.slot_score(anchors[0], h, None)?;
                let (m, sd, f) = aggregate(&[s])?;
                (vec![PermutationScore { label: "s;h".into(), score: s }], m, sd, f)
            }
            ScoringMode::SingleRef => {
                let mut pats = vec![pattern(0, 1)];
                if opts.two_permutations {
                    pats.push(pattern(1, 0));
                }
                let scores = pats.iter().map(perm).collect::<Result<Vec<_>>>()?;
                let values: Vec<f64> = scores.iter().map(|p| p.score).collect();
                let (m, sd, f) = aggregate(&values)?;
                (scores, m, sd, f)
            }
            ScoringMode::MultiRef => {
                let mut all = Vec::new();
                let mut groups = Vec::new();
                for k in 2..anchors.len() {
                    let scores = six_permutations(k).iter().map(perm).collect::<Result<Vec<_>>>()?;
                    let values: Vec<f64> = scores.iter().map(|p| p.score).collect();
                    groups.push(aggregate(&values)?);
                    all.extend(scores);
                }
                let n = groups.len() as f64;
                if groups.len() == 1 {
                    let (m, sd, f) = groups[0];
                    (all, m, sd, f)
                } else {
                    let m = groups.iter().map(|g| g.0).sum::<f64>() / n;
                    let sd = groups.iter().map(|g| g.1).sum::<f64>() / n;
                    let f = groups.iter().map(|g| g.2).sum::<f64>() / n;
                    (all, m, sd, f)
                }
            }
        };
        Ok(Prediction {
            mean,
            stdev,
            final_score,
            permutation_scores: scores,
            mode: opts.mode,
        })
    }

    fn record_texts(record: &SegmentRecord, opts: ScoreOptions) -> Vec<&str> {
        let mut t = vec![record.source.as_str(), record.hypothesis.as_str()];
        if opts.mode != ScoringMode::Qe {
            t.extend(record.references.iter().map(String::as_str).filter(|r| !r.trim().is_empty()));
        }
        t
    }

    pub fn score_segment(&self, record: &SegmentRecord, opts: ScoreOptions) -> Result<Prediction> {
        self.check_mode(record, opts)?;
        let emb = self.embed_many(Self::record_texts(record, opts))?;
        self.score_with(record, opts, &emb)
    }

    /// Encodes every text of `records` in one batch, then scores each
    /// segment in order.
    pub fn score_batch(&self, records: &[SegmentRecord], opts: ScoreOptions) -> Result<Vec<Prediction>> {
        for r in records {
            self.check_mode(r, opts)?;
        }
        let emb = self.embed_many(records.iter().flat_map(|r| Self::record_texts(r, opts)))?;
        records.iter().map(|r| self.score_with(r, opts, &emb)).collect()
    }

    /// Scores one document as a single batch and averages its finals.
    pub fn score_document(
        &self,
        doc: &[SegmentRecord],
        opts: ScoreOptions,
        rule: WeightRule,
    ) -> Result<(DocScore, Vec<Prediction>)> {
        let first = doc.first().ok_or_else(|| Error::contract("document has no segments"))?;
        if doc.iter().any(|r| r.doc_id != first.doc_id || r.system_id != first.system_id) {
            return Err(Error::contract("segments of one document must share doc_id and system_id"));
        }
        let preds = self.score_batch(doc, opts)?;
        let scores: Vec<f64> = preds.iter().map(|p| p.final_score).collect();
        let weights = doc.iter().map(|r| rule.weight(r)).collect::<Result<Vec<_>>>()?;
        let doc_id = first.doc_id.clone().unwrap_or_default();
        Ok((doc_average(&doc_id, &first.system_id, &scores, &weights)?, preds))
    }

    /// Unweighted mean of the segment finals of one system.
    pub fn score_system(&self, records: &[SegmentRecord], opts: ScoreOptions) -> Result<f64> {
        let first = records.first().ok_or_else(|| Error::contract("system has no segments"))?;
        if records
            .iter()
            .any(|r| r.system_id != first.system_id || r.lang_pair != first.lang_pair)
        {
            return Err(Error::contract("records of one system must share system_id and lang_pair"));
        }
        let preds = self.score_batch(records, opts)?;
        system_average(&preds.iter().map(|p| p.final_score).collect::<Vec<_>>())
    }
}
