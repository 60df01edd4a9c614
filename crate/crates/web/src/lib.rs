//! WebAssembly bindings for a static demo page. Each operation has a plain
//! Rust form returning JSON text and a `#[wasm_bindgen]` wrapper that turns
//! errors into JavaScript exceptions.

use mteval_core::corpus::{compute_ter, Tokenizer};
use mteval_core::inference::{aggregate, doc_average};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
struct TerReport {
    edits: usize,
    shifts: usize,
    ref_len: usize,
    ter: f64,
    exact: bool,
    hyp_tokens: Vec<String>,
    ref_tokens: Vec<String>,
}

#[derive(Debug, Serialize)]
struct AggregateReport {
    mean: f64,
    stdev: f64,
    #[serde(rename = "final")]
    final_score: f64,
}

#[derive(Debug, Serialize)]
struct DocReport {
    micro: f64,
    #[serde(rename = "macro")]
    macro_avg: f64,
    segments: usize,
    total_weight: f64,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Parses numbers separated by commas, whitespace or newlines.
pub fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

/// Word-level TER of `hyp` against `reference`, with the edit counts.
pub fn ter_json(hyp: &str, reference: &str, lowercase: bool) -> Result<String, String> {
    let tok = Tokenizer { lowercase };
    let (h, r) = (tok.tokenize(hyp), tok.tokenize(reference));
    let s = compute_ter(&h, &r).map_err(|e| e.to_string())?;
    to_json(&TerReport {
        edits: s.edits,
        shifts: s.shifts,
        ref_len: s.ref_len,
        ter: s.value,
        exact: s.exact,
        hyp_tokens: h,
        ref_tokens: r,
    })
}

/// Mean, population spread and spread-penalized final score of the
/// per-permutation scores of one segment.
pub fn aggregate_json(scores: &str) -> Result<String, String> {
    let v = parse_numbers(scores)?;
    let (mean, stdev, final_score) = aggregate(&v).map_err(|e| e.to_string())?;
    to_json(&AggregateReport {
        mean,
        stdev,
        final_score,
    })
}

/// Length-weighted (micro) and plain (macro) averages of one document's
/// segment scores.
pub fn doc_json(scores: &str, weights: &str) -> Result<String, String> {
    let s = parse_numbers(scores)?;
    let w = if weights.trim().is_empty() {
        vec![1.0; s.len()]
    } else {
        parse_numbers(weights)?
    };
    let d = doc_average("doc", "system", &s, &w).map_err(|e| e.to_string())?;
    to_json(&DocReport {
        micro: d.micro,
        macro_avg: d.macro_avg,
        segments: d.segment_count,
        total_weight: d.total_weight,
    })
}

#[wasm_bindgen]
pub fn ter(hyp: &str, reference: &str, lowercase: bool) -> Result<String, JsError> {
    ter_json(hyp, reference, lowercase).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = aggregateScores)]
pub fn aggregate_scores(scores: &str) -> Result<String, JsError> {
    aggregate_json(scores).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = documentAverages)]
pub fn document_averages(scores: &str, weights: &str) -> Result<String, JsError> {
    doc_json(scores, weights).map_err(|e| JsError::new(&e))
}
