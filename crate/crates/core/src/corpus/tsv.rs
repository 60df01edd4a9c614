//! Tab-separated corpus files.
//!
//! Every file starts with a header row; columns are located by name, so their
//! order is free. Fields are taken verbatim (no quoting, no trimming). Rows
//! that cannot be turned into records are returned as [`Reject`]s instead of
//! aborting the parse.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::record::{DarrTuple, Reject, ScoreKind, SegmentRecord};
use crate::error::{Error, Result};
use crate::fsio;
use crate::inference::{ScoreRow, ScoringMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CorpusFormat {
    DaTsv,
    DarrTsv,
    HterTsv,
    ScoreTsv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "da" | "da_tsv" => Ok(CorpusFormat::DaTsv),
            "darr" | "darr_tsv" => Ok(CorpusFormat::DarrTsv),
            "hter" | "hter_tsv" => Ok(CorpusFormat::HterTsv),
            "score" | "score_tsv" | "scores" => Ok(CorpusFormat::ScoreTsv),
            other => Err(Error::contract(format!("unknown corpus format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    /// Kind assigned to the `score` column unless a `kind` column overrides it.
    pub score_kind: ScoreKind,
    /// Reference-free (QE) input: the `ref` column may be absent or empty.
    pub allow_missing_reference: bool,
    /// When false the `score` column is optional (unlabelled test data).
    pub require_score: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            score_kind: ScoreKind::Da,
            allow_missing_reference: false,
            require_score: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorpusData {
    Segments(Vec<SegmentRecord>),
    Darr(Vec<DarrTuple>),
    Scores(Vec<ScoreRow>),
}

impl CorpusData {
    pub fn len(&self) -> usize {
        match self {
            CorpusData::Segments(v) => v.len(),
            CorpusData::Darr(v) => v.len(),
            CorpusData::Scores(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn into_segments(self) -> Result<Vec<SegmentRecord>> {
        match self {
            CorpusData::Segments(v) => Ok(v),
            _ => Err(Error::contract("expected segment records")),
        }
    }

    pub fn into_darr(self) -> Result<Vec<DarrTuple>> {
        match self {
            CorpusData::Darr(v) => Ok(v),
            _ => Err(Error::contract("expected DARR tuples")),
        }
    }

    pub fn into_scores(self) -> Result<Vec<ScoreRow>> {
        match self {
            CorpusData::Scores(v) => Ok(v),
            _ => Err(Error::contract("expected score rows")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCorpus {
    pub data: CorpusData,
    pub rejects: Vec<Reject>,
}

struct Columns {
    index: HashMap<String, usize>,
    refs: Vec<usize>,
}

impl Columns {
    fn new(header: &csv::ByteRecord) -> Self {
        let mut index = HashMap::new();
        for (i, name) in header.iter().enumerate() {
            let name = String::from_utf8_lossy(name).trim().to_string();
            index.entry(name).or_insert(i);
        }
        // ref, ref2, ref3, ... in numeric order
        let mut refs = Vec::new();
        if let Some(&i) = index.get("ref") {
            refs.push(i);
            let mut k = 2;
            while let Some(&i) = index.get(&format!("ref{k}")) {
                refs.push(i);
                k += 1;
            }
        }
        Columns { index, refs }
    }

    fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn require(&self, path: &Path, names: &[&str]) -> Result<()> {
        for name in names {
            if !self.index.contains_key(*name) {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("missing mandatory column `{name}`"),
                });
            }
        }
        Ok(())
    }
}

struct Row<'a> {
    fields: Vec<&'a str>,
}

impl<'a> Row<'a> {
    fn field(&self, col: Option<usize>) -> Option<&'a str> {
        col.and_then(|i| self.fields.get(i).copied())
    }

    fn non_empty(&self, col: Option<usize>) -> Option<&'a str> {
        self.field(col).filter(|s| !s.is_empty())
    }
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .has_headers(true)
        .from_reader(bytes)
}

fn raw_line(fields: &[&str]) -> String {
    fields.join("\t")
}

/// Parses a corpus file of the given format.
pub fn parse_corpus(path: &Path, format: CorpusFormat, options: ParseOptions) -> Result<ParsedCorpus> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_corpus_bytes(path, &bytes, format, options)
}

/// Same as [`parse_corpus`] over an in-memory buffer; `path` is only used in
/// error messages.
pub fn parse_corpus_bytes(
    path: &Path,
    bytes: &[u8],
    format: CorpusFormat,
    options: ParseOptions,
) -> Result<ParsedCorpus> {
    let empty = match format {
        CorpusFormat::DarrTsv => CorpusData::Darr(Vec::new()),
        CorpusFormat::ScoreTsv => CorpusData::Scores(Vec::new()),
        _ => CorpusData::Segments(Vec::new()),
    };
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(ParsedCorpus {
            data: empty,
            rejects: Vec::new(),
        });
    }
    let mut rdr = reader(bytes);
    let header = rdr
        .byte_headers()
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .clone();
    let cols = Columns::new(&header);
    match format {
        CorpusFormat::DaTsv => {
            let mut required = vec!["src", "mt", "system", "lp"];
            if options.require_score {
                required.push("score");
            }
            if !options.allow_missing_reference {
                required.push("ref");
            }
            cols.require(path, &required)?;
        }
        CorpusFormat::HterTsv => cols.require(path, &["src", "mt", "ref", "pe", "lp"])?,
        CorpusFormat::DarrTsv => cols.require(path, &["src", "ref", "better", "worse", "lp"])?,
        CorpusFormat::ScoreTsv => cols.require(path, &["id", "final"])?,
    }

    let mut rejects = Vec::new();
    let mut segments = Vec::new();
    let mut darr = Vec::new();
    let mut scores = Vec::new();
    let mut seen_keys: HashSet<(String, String, u64)> = HashSet::new();
    let width = header.len();

    for (n, result) in rdr.byte_records().enumerate() {
        let record = result.map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(n as u64 + 2);
        let mut fields = Vec::with_capacity(record.len());
        let mut utf8_ok = true;
        for f in record.iter() {
            match std::str::from_utf8(f) {
                Ok(s) => fields.push(s),
                Err(_) => {
                    utf8_ok = false;
                    break;
                }
            }
        }
        if !utf8_ok {
            rejects.push(Reject {
                line: Some(line),
                id: None,
                reason: "invalid utf-8".to_string(),
                raw: String::from_utf8_lossy(record.as_slice()).into_owned(),
            });
            continue;
        }
        if fields.len() == 1 && fields[0].is_empty() {
            continue;
        }
        let row = Row { fields };
        let mut reject = |reason: &str, id: Option<String>| {
            rejects.push(Reject {
                line: Some(line),
                id,
                reason: reason.to_string(),
                raw: raw_line(&row.fields),
            });
        };
        if row.fields.len() != width {
            reject("wrong field count", None);
            continue;
        }
        match format {
            CorpusFormat::DaTsv | CorpusFormat::HterTsv => {
                let id = row
                    .non_empty(cols.get("id"))
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("row{}", n + 1));
                let Some(source) = row.non_empty(cols.get("src")) else {
                    reject("missing source", Some(id));
                    continue;
                };
                let Some(hypothesis) = row.non_empty(cols.get("mt")) else {
                    reject("missing hypothesis", Some(id));
                    continue;
                };
                let mut references: Vec<String> = Vec::new();
                for &i in &cols.refs {
                    if let Some(r) = row.non_empty(Some(i)) {
                        references.push(r.to_string());
                    }
                }
                let primary_missing = row.non_empty(cols.get("ref")).is_none();
                if primary_missing && !(format == CorpusFormat::DaTsv && options.allow_missing_reference) {
                    reject("missing reference", Some(id));
                    continue;
                }
                if format == CorpusFormat::HterTsv {
                    // the post-edit lives in reference slot 1
                    references.truncate(1);
                    if let Some(pe) = row.non_empty(cols.get("pe")) {
                        references.push(pe.to_string());
                    }
                }
                let mut kind = if format == CorpusFormat::HterTsv {
                    ScoreKind::None
                } else {
                    options.score_kind
                };
                if let Some(k) = row.non_empty(cols.get("kind")) {
                    match ScoreKind::from_str(k) {
                        Ok(k) => kind = k,
                        Err(_) => {
                            reject("invalid score kind", Some(id));
                            continue;
                        }
                    }
                }
                let human_score = match row.non_empty(cols.get("score")) {
                    None => {
                        if format == CorpusFormat::DaTsv && options.require_score {
                            reject("missing score", Some(id));
                            continue;
                        }
                        None
                    }
                    Some(s) => match s.trim().parse::<f64>() {
                        Ok(v) if kind.admits(v) => Some(v),
                        Ok(_) => {
                            reject("score out of range", Some(id));
                            continue;
                        }
                        Err(_) => {
                            reject("invalid score", Some(id));
                            continue;
                        }
                    },
                };
                if human_score.is_none() && format == CorpusFormat::DaTsv && !options.require_score {
                    kind = ScoreKind::None;
                }
                let seg_index = match row.non_empty(cols.get("seg")) {
                    None => None,
                    Some(s) => match s.trim().parse::<u64>() {
                        Ok(v) => Some(v),
                        Err(_) => {
                            reject("invalid seg index", Some(id));
                            continue;
                        }
                    },
                };
                let doc_id = row.non_empty(cols.get("doc")).map(str::to_string);
                let system_id = row
                    .non_empty(cols.get("system"))
                    .unwrap_or("unknown")
                    .to_string();
                let Some(lang_pair) = row.non_empty(cols.get("lp")) else {
                    reject("missing language pair", Some(id));
                    continue;
                };
                if let (Some(doc), Some(seg)) = (&doc_id, seg_index) {
                    if !seen_keys.insert((system_id.clone(), doc.clone(), seg)) {
                        reject("duplicate (system, doc, seg)", Some(id));
                        continue;
                    }
                }
                segments.push(SegmentRecord {
                    id,
                    lang_pair: lang_pair.to_string(),
                    source: source.to_string(),
                    hypothesis: hypothesis.to_string(),
                    references,
                    human_score,
                    score_kind: kind,
                    system_id,
                    doc_id,
                    seg_index,
                    line: Some(line),
                });
            }
            CorpusFormat::DarrTsv => {
                let get = |name: &str| row.non_empty(cols.get(name));
                let (Some(source), Some(reference), Some(better), Some(worse), Some(lp)) =
                    (get("src"), get("ref"), get("better"), get("worse"), get("lp"))
                else {
                    reject("missing field", None);
                    continue;
                };
                if better == worse {
                    reject("identical hypotheses", None);
                    continue;
                }
                darr.push(DarrTuple {
                    source: source.to_string(),
                    reference: reference.to_string(),
                    hyp_better: better.to_string(),
                    hyp_worse: worse.to_string(),
                    lang_pair: lp.to_string(),
                });
            }
            CorpusFormat::ScoreTsv => {
                let id = row.non_empty(cols.get("id")).unwrap_or("").to_string();
                if id.is_empty() {
                    reject("missing id", None);
                    continue;
                }
                let num = |name: &str| -> std::result::Result<Option<f64>, ()> {
                    match row.non_empty(cols.get(name)) {
                        None => Ok(None),
                        Some(s) => s.trim().parse::<f64>().map(Some).map_err(|_| ()),
                    }
                };
                let (Ok(Some(fin)), Ok(mean), Ok(stdev)) = (num("final"), num("mean"), num("stdev")) else {
                    reject("invalid score", Some(id));
                    continue;
                };
                let mode = match row.non_empty(cols.get("mode")) {
                    None => ScoringMode::SingleRef,
                    Some(m) => match ScoringMode::from_str(m) {
                        Ok(m) => m,
                        Err(_) => {
                            reject("invalid mode", Some(id));
                            continue;
                        }
                    },
                };
                let seg = match row.non_empty(cols.get("seg")) {
                    None => None,
                    Some(s) => match s.trim().parse::<u64>() {
                        Ok(v) => Some(v),
                        Err(_) => {
                            reject("invalid seg index", Some(id));
                            continue;
                        }
                    },
                };
                scores.push(ScoreRow {
                    id,
                    system: row.non_empty(cols.get("system")).unwrap_or("unknown").to_string(),
                    doc: row.non_empty(cols.get("doc")).map(str::to_string),
                    seg,
                    mode,
                    mean: mean.unwrap_or(fin),
                    stdev: stdev.unwrap_or(0.0),
                    final_score: fin,
                });
            }
        }
    }

    let data = match format {
        CorpusFormat::DarrTsv => CorpusData::Darr(darr),
        CorpusFormat::ScoreTsv => CorpusData::Scores(scores),
        _ => CorpusData::Segments(segments),
    };
    Ok(ParsedCorpus { data, rejects })
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Never)
        .flexible(false)
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::contract(format!("tsv writer: {e}")))
}

fn check_field(s: &str) -> Result<&str> {
    if s.contains(['\t', '\n', '\r']) {
        return Err(Error::contract(format!(
            "text field contains a tab or newline and cannot be written as TSV: {s:?}"
        )));
    }
    Ok(s)
}

fn csv_err(e: csv::Error) -> Error {
    Error::contract(format!("tsv writer: {e}"))
}

/// Renders segment records in the same TSV dialect the parser reads.
pub fn segments_to_tsv(records: &[SegmentRecord]) -> Result<Vec<u8>> {
    let max_refs = records.iter().map(|r| r.references.len()).max().unwrap_or(1).max(1);
    let mut header: Vec<String> = vec!["id".into(), "lp".into(), "src".into(), "mt".into(), "ref".into()];
    for k in 2..=max_refs {
        header.push(format!("ref{k}"));
    }
    for c in ["score", "kind", "system", "doc", "seg"] {
        header.push(c.into());
    }
    let mut w = writer();
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row: Vec<String> = vec![
            check_field(&r.id)?.to_string(),
            check_field(&r.lang_pair)?.to_string(),
            check_field(&r.source)?.to_string(),
            check_field(&r.hypothesis)?.to_string(),
        ];
        for k in 0..max_refs {
            row.push(check_field(r.references.get(k).map(String::as_str).unwrap_or(""))?.to_string());
        }
        row.push(r.human_score.map(format_score).unwrap_or_default());
        row.push(r.score_kind.as_str().to_string());
        row.push(check_field(&r.system_id)?.to_string());
        row.push(r.doc_id.clone().unwrap_or_default());
        row.push(r.seg_index.map(|s| s.to_string()).unwrap_or_default());
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

pub fn darr_to_tsv(tuples: &[DarrTuple]) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(["lp", "src", "ref", "better", "worse"]).map_err(csv_err)?;
    for t in tuples {
        w.write_record([
            check_field(&t.lang_pair)?,
            check_field(&t.source)?,
            check_field(&t.reference)?,
            check_field(&t.hyp_better)?,
            check_field(&t.hyp_worse)?,
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn rejects_to_tsv(rejects: &[Reject]) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(["line", "id", "reason", "raw"]).map_err(csv_err)?;
    for r in rejects {
        // raw rows may themselves contain tabs; keep them on one field
        let raw = r.raw.replace('\t', "\\t").replace(['\n', '\r'], " ");
        w.write_record([
            r.line.map(|l| l.to_string()).unwrap_or_default(),
            r.id.clone().unwrap_or_default(),
            r.reason.clone(),
            raw,
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn format_score(v: f64) -> String {
    format!("{v}")
}

pub fn write_segments(path: &Path, records: &[SegmentRecord]) -> Result<()> {
    fsio::write_atomic(path, &segments_to_tsv(records)?)
}

pub fn write_darr(path: &Path, tuples: &[DarrTuple]) -> Result<()> {
    fsio::write_atomic(path, &darr_to_tsv(tuples)?)
}

pub fn write_rejects(path: &Path, rejects: &[Reject]) -> Result<()> {
    fsio::write_atomic(path, &rejects_to_tsv(rejects)?)
}
