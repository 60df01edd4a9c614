use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::DocScore;
use super::scorer::{PermutationScore, Prediction, ScoringMode};
use crate::corpus::tsv::format_score;
use crate::corpus::SegmentRecord;
use crate::error::{Error, Result};
use crate::fsio::write_atomic;

/// One line of a scoring output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub system: String,
    pub doc: Option<String>,
    pub seg: Option<u64>,
    pub mode: ScoringMode,
    pub mean: f64,
    pub stdev: f64,
    #[serde(rename = "final")]
    pub final_score: f64,
}

impl ScoreRow {
    pub fn new(record: &SegmentRecord, p: &Prediction) -> Self {
        ScoreRow {
            id: record.id.clone(),
            system: record.system_id.clone(),
            doc: record.doc_id.clone(),
            seg: record.seg_index,
            mode: p.mode,
            mean: p.mean,
            stdev: p.stdev,
            final_score: p.final_score,
        }
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten)]
    row: &'a ScoreRow,
    lang_pair: &'a str,
    permutation_scores: &'a [PermutationScore],
}

fn check(s: &str) -> Result<&str> {
    if s.contains(['\t', '\n', '\r']) {
        return Err(Error::contract(format!("field {s:?} cannot be written to TSV")));
    }
    Ok(s)
}

pub const SCORE_TSV_HEADER: &str = "id\tsystem\tdoc\tseg\tmode\tmean\tstdev\tfinal";

pub fn scores_to_tsv(rows: &[ScoreRow]) -> Result<Vec<u8>> {
    let mut out = String::from(SCORE_TSV_HEADER);
    out.push('\n');
    for r in rows {
        let line = [
            check(&r.id)?.to_string(),
            check(&r.system)?.to_string(),
            check(r.doc.as_deref().unwrap_or(""))?.to_string(),
            r.seg.map(|s| s.to_string()).unwrap_or_default(),
            r.mode.to_string(),
            format_score(r.mean),
            format_score(r.stdev),
            format_score(r.final_score),
        ]
        .join("\t");
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out.into_bytes())
}

/// JSON lines with the per-permutation scores of every segment.
pub fn scores_to_jsonl(records: &[SegmentRecord], preds: &[Prediction]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (rec, p) in records.iter().zip(preds) {
        let row = ScoreRow::new(rec, p);
        serde_json::to_writer(
            &mut out,
            &JsonRow {
                row: &row,
                lang_pair: &rec.lang_pair,
                permutation_scores: &p.permutation_scores,
            },
        )?;
        out.push(b'\n');
    }
    Ok(out)
}

pub const DOC_TSV_HEADER: &str = "system\tdoc\tsegments\ttotal_weight\tmicro\tmacro";

pub fn docs_to_tsv(docs: &[DocScore]) -> Result<Vec<u8>> {
    let mut out = String::from(DOC_TSV_HEADER);
    out.push('\n');
    for d in docs {
        out.push_str(
            &[
                check(&d.system_id)?.to_string(),
                check(&d.doc_id)?.to_string(),
                d.segment_count.to_string(),
                format_score(d.total_weight),
                format_score(d.micro),
                format_score(d.macro_avg),
            ]
            .join("\t"),
        );
        out.push('\n');
    }
    Ok(out.into_bytes())
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    write_atomic(path, &scores_to_tsv(rows)?)
}
