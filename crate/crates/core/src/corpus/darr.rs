//! Relative rankings derived from direct-assessment scores.

use std::collections::BTreeMap;

use super::record::{DarrTuple, ScoreKind, SegmentRecord};
use crate::error::{Error, Result};

/// Default minimum score gap (inclusive) for a pair to become a judgement.
pub const DEFAULT_DARR_THRESHOLD: f64 = 25.0;

/// Records judging the same source segment. Keyed by `(lp, doc, seg)` when a
/// segment index is present, otherwise by `(lp, source text)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SourceKey {
    Indexed(String, String, u64),
    Text(String, String),
}

fn source_key(r: &SegmentRecord) -> SourceKey {
    match r.seg_index {
        Some(seg) => SourceKey::Indexed(r.lang_pair.clone(), r.doc_id.clone().unwrap_or_default(), seg),
        None => SourceKey::Text(r.lang_pair.clone(), r.source.clone()),
    }
}

/// Turns scored hypotheses into (better, worse) tuples.
///
/// Every pair of hypotheses of one source whose scores differ by at least
/// `threshold` yields a tuple; closer pairs are dropped, as are pairs whose
/// hypothesis texts are identical. Output is ordered by source key, then by
/// the system-id pair.
pub fn da_to_darr(records: &[SegmentRecord], threshold: f64) -> Result<Vec<DarrTuple>> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::contract(format!("DARR threshold must be a non-negative number, got {threshold}")));
    }
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let kind = first.score_kind;
    if !matches!(kind, ScoreKind::Da | ScoreKind::DaZ) {
        return Err(Error::contract(format!("DARR conversion needs DA or DA_Z scores, got {kind}")));
    }
    let mut groups: BTreeMap<SourceKey, Vec<&SegmentRecord>> = BTreeMap::new();
    for r in records {
        if r.score_kind != kind {
            return Err(Error::contract(format!(
                "mixed score kinds in DARR conversion: {kind} and {} (record {})",
                r.score_kind, r.id
            )));
        }
        if r.human_score.is_none() {
            return Err(Error::contract(format!("record {} has no human score", r.id)));
        }
        groups.entry(source_key(r)).or_default().push(r);
    }

    let mut out = Vec::new();
    for (_, mut group) in groups {
        group.sort_by(|a, b| a.system_id.cmp(&b.system_id).then_with(|| a.id.cmp(&b.id)));
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                let (a, b) = (group[i], group[j]);
                let (sa, sb) = (a.human_score.unwrap(), b.human_score.unwrap());
                if (sa - sb).abs() < threshold || sa == sb || a.hypothesis == b.hypothesis {
                    continue;
                }
                let (better, worse) = if sa > sb { (a, b) } else { (b, a) };
                out.push(DarrTuple {
                    source: a.source.clone(),
                    reference: a.primary_reference().unwrap_or_default().to_string(),
                    hyp_better: better.hypothesis.clone(),
                    hyp_worse: worse.hypothesis.clone(),
                    lang_pair: a.lang_pair.clone(),
                });
            }
        }
    }
    Ok(out)
}
