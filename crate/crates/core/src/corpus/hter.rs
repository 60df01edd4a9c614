use super::record::{Reject, ScoreKind, SegmentRecord};
use super::ter::{compute_ter_with, TerOptions};
use super::tokenize::Tokenizer;
use crate::error::Result;

/// Labels each record with the TER of its hypothesis against the post-edit
/// stored in reference slot 1; the post-edit is removed from the references.
/// Records without a post-edit, or whose post-edit has no tokens, are returned
/// as rejects.
pub fn build_hter_corpus(
    records: &[SegmentRecord],
    tokenizer: &Tokenizer,
    options: TerOptions,
) -> Result<(Vec<SegmentRecord>, Vec<Reject>)> {
    let mut out = Vec::with_capacity(records.len());
    let mut rejects = Vec::new();
    for r in records {
        let reject = |reason: &str| Reject {
            line: r.line,
            id: Some(r.id.clone()),
            reason: reason.to_string(),
            raw: format!("{}\t{}", r.source, r.hypothesis),
        };
        let Some(pe) = r.references.get(1) else {
            rejects.push(reject("missing post-edit"));
            continue;
        };
        let target = tokenizer.tokenize(pe);
        if target.is_empty() {
            rejects.push(reject("missing post-edit"));
            continue;
        }
        let hyp = tokenizer.tokenize(&r.hypothesis);
        let ter = compute_ter_with(&hyp, &target, options)?;
        let mut rec = r.clone();
        rec.references.truncate(1);
        rec.human_score = Some(ter.value);
        rec.score_kind = ScoreKind::Hter;
        out.push(rec);
    }
    Ok((out, rejects))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, hyp: &str, pe: Option<&str>) -> SegmentRecord {
        let mut refs = vec!["the reference".to_string()];
        if let Some(pe) = pe {
            refs.push(pe.to_string());
        }
        SegmentRecord::new(id, "source", hyp, refs)
    }

    #[test]
    fn post_edit_equal_to_hypothesis_scores_zero() {
        let (out, rej) = build_hter_corpus(&[rec("1", "a b c", Some("a b c"))], &Tokenizer::default(), TerOptions::default()).unwrap();
        assert!(rej.is_empty());
        assert_eq!(out[0].human_score, Some(0.0));
        assert_eq!(out[0].score_kind, ScoreKind::Hter);
        assert_eq!(out[0].references, vec!["the reference".to_string()]);
    }

    #[test]
    fn disjoint_post_edit_scores_one() {
        let (out, _) = build_hter_corpus(&[rec("1", "w x y z", Some("a b c d"))], &Tokenizer::default(), TerOptions::default()).unwrap();
        assert_eq!(out[0].human_score, Some(1.0));
    }

    #[test]
    fn missing_post_edit_is_rejected() {
        let recs = [rec("1", "a", Some("a")), rec("2", "a", None), rec("3", "a b", Some("a c"))];
        let (out, rej) = build_hter_corpus(&recs, &Tokenizer::default(), TerOptions::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(rej.len(), 1);
        assert_eq!(rej[0].id.as_deref(), Some("2"));
        assert_eq!(rej[0].reason, "missing post-edit");
    }
}
