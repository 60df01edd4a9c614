//! The four pipeline stages. Each reads its section of a [`RunConfig`],
//! writes its outputs atomically under the run's output directory, and
//! records the resolved configuration next to them.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EvaluateConfig, RunConfig};
use crate::corpus::tsv::{write_darr, write_rejects, write_segments};
use crate::corpus::{
    build_hter_corpus, da_to_darr, parse_corpus, CorpusFormat, ParseOptions, ScoreKind, SegmentRecord, TerOptions,
    Tokenizer,
};
use crate::error::{Error, Result};
use crate::fsio::{short_sha256, write_atomic};
use crate::inference::{
    docs_to_tsv, doc_average, scores_to_jsonl, system_average, write_scores, DocScore, Prediction, ScoreOptions,
    ScoreRow, Scorer, ScoringMode,
};
use crate::metaeval::{
    build_report, doc_pearson, kendall_darr, pearson_abs, topn_pairwise_kendall, Cell, EvalReport, Measurement,
    MetricScores, Orientation, ReportLayout, ReportMetadata, Section,
};
use crate::model::{load_params, save_params, train, Encoder, ModelMode, ModelParams, ProviderSpec, TrainData};

/// Runs `f` on a thread pool sized by the config's `jobs` setting.
pub fn with_pool<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::contract(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

/// Writes `<run>.<stage>.config.toml` with every default made explicit.
pub fn write_snapshot(cfg: &RunConfig, stage: &str) -> Result<PathBuf> {
    let path = cfg.output_path(&format!("{stage}.config.toml"));
    write_atomic(&path, cfg.resolved()?.to_toml()?.as_bytes())?;
    Ok(path)
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| Error::contract(format!("the configuration has no [{name}] section")))
}

/// `data/x.tsv` becomes `data/x.rejects.tsv`.
pub fn rejects_path(input: &Path) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".to_string());
    input.with_file_name(format!("{stem}.rejects.tsv"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub output: PathBuf,
    pub rejects_path: PathBuf,
    /// Segment records, or relative-ranking tuples when converting.
    pub written: usize,
    pub rejected: usize,
}

/// Parses a raw corpus, optionally labels it with HTER or converts it to
/// relative-ranking tuples, and writes the normalized file plus a rejects
/// report.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let ic = section(&cfg.ingest, "ingest")?;
    let format = if ic.hter { CorpusFormat::HterTsv } else { ic.format };
    let opts = ParseOptions {
        score_kind: ic.score_kind,
        allow_missing_reference: ic.allow_missing_reference,
        require_score: !ic.hter && format != CorpusFormat::DarrTsv,
    };
    let parsed = parse_corpus(&ic.input, format, opts)?;
    let mut rejects = parsed.rejects;
    let rejects_path = rejects_path(&ic.input);

    let (output, written) = if format == CorpusFormat::DarrTsv {
        let tuples = parsed.data.into_darr()?;
        let out = ic.output.clone().unwrap_or_else(|| cfg.output_path("darr.tsv"));
        write_darr(&out, &tuples)?;
        (out, tuples.len())
    } else {
        let mut records = parsed.data.into_segments()?;
        if ic.hter {
            let tok = Tokenizer { lowercase: ic.lowercase };
            let (labelled, more) = build_hter_corpus(&records, &tok, TerOptions::default())?;
            records = labelled;
            rejects.extend(more);
        }
        if ic.darr {
            let tuples = da_to_darr(&records, ic.threshold)?;
            let out = ic.output.clone().unwrap_or_else(|| cfg.output_path("darr.tsv"));
            write_darr(&out, &tuples)?;
            (out, tuples.len())
        } else {
            let out = ic.output.clone().unwrap_or_else(|| cfg.output_path("ingest.tsv"));
            write_segments(&out, &records)?;
            (out, records.len())
        }
    };
    write_rejects(&rejects_path, &rejects)?;
    write_snapshot(cfg, "ingest")?;
    Ok(IngestSummary {
        output,
        rejects_path,
        written,
        rejected: rejects.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub fingerprint: String,
    pub epochs: usize,
    pub final_loss: f64,
}

/// Trains a model and writes the checkpoint and a JSON-lines epoch log.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let tc = section(&cfg.train, "train")?;
    let model = cfg.model_config()?;
    let ranker = model.mode == ModelMode::Ranker;
    let format = tc
        .format
        .unwrap_or(if ranker { CorpusFormat::DarrTsv } else { CorpusFormat::DaTsv });
    match (ranker, format) {
        (true, CorpusFormat::DarrTsv) | (false, CorpusFormat::DaTsv | CorpusFormat::HterTsv) => {}
        (true, f) => {
            return Err(Error::contract(format!(
                "RANKER training needs relative-ranking tuples (DARR_TSV), got {f:?}"
            )))
        }
        (false, f) => {
            return Err(Error::contract(format!(
                "{} training needs scored segments (DA_TSV), got {f:?}",
                model.mode.as_str()
            )))
        }
    }
    let opts = ParseOptions {
        score_kind: tc.score_kind,
        allow_missing_reference: model.mode == ModelMode::QeEstimator,
        require_score: true,
    };
    let data = parse_corpus(&tc.corpus, format, opts)?.data;
    let spec = cfg.resolved_provider();
    let outcome = with_pool(cfg, || match &data {
        crate::corpus::CorpusData::Darr(t) => train(TrainData::Darr(t), &model, &spec),
        crate::corpus::CorpusData::Segments(r) => train(TrainData::Segments(r), &model, &spec),
        crate::corpus::CorpusData::Scores(_) => Err(Error::contract("score files cannot be used for training")),
    })?;

    let checkpoint = cfg.checkpoint_path();
    save_params(&outcome.params, &checkpoint)?;
    let mut log = Vec::new();
    for e in &outcome.log {
        serde_json::to_writer(&mut log, e)?;
        log.push(b'\n');
    }
    let log_path = cfg.output_path("train_log.jsonl");
    write_atomic(&log_path, &log)?;
    write_snapshot(cfg, "train")?;
    Ok(TrainSummary {
        checkpoint,
        log_path,
        fingerprint: model.fingerprint(),
        epochs: outcome.log.len(),
        final_loss: outcome.log.last().map_or(f64::NAN, |e| e.loss),
    })
}

/// Provenance written next to a score file and picked up by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMeta {
    pub fingerprint: String,
    pub model_mode: ModelMode,
    pub scoring_mode: ScoringMode,
    pub checkpoint_sha256: String,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub scores_tsv: PathBuf,
    pub scores_jsonl: PathBuf,
    pub docs_tsv: Option<PathBuf>,
    pub segments: usize,
    pub documents: usize,
}

fn build_scorer(params: &ModelParams) -> Result<Scorer<'_>> {
    if let ProviderSpec::Remote(r) = &params.provider {
        if r.cache_path.is_none() {
            let probe = RunConfig {
                provider: params.provider.clone(),
                ..RunConfig::load(None, &[])?
            };
            if let Encoder::Fixed(p) = probe.resolved_provider().instantiate(params.config.embed_dim, [])? {
                return Scorer::with_provider(params, p);
            }
        }
    }
    Scorer::new(params)
}

/// Scores a corpus with a trained checkpoint.
pub fn cmd_score(cfg: &RunConfig) -> Result<ScoreSummary> {
    let sc = section(&cfg.score, "score")?;
    let ckpt_path = sc.checkpoint.clone().unwrap_or_else(|| cfg.checkpoint_path());
    let ckpt_bytes = std::fs::read(&ckpt_path).map_err(|e| Error::io(&ckpt_path, e))?;
    let params = load_params(&ckpt_path)?;
    let mode = sc.mode.unwrap_or(if params.config.mode == ModelMode::QeEstimator {
        ScoringMode::Qe
    } else {
        ScoringMode::SingleRef
    });
    let opts = ScoreOptions {
        mode,
        two_permutations: sc.two_permutations,
    };
    let parse_opts = ParseOptions {
        score_kind: ScoreKind::Da,
        allow_missing_reference: mode == ScoringMode::Qe,
        require_score: false,
    };
    let records = parse_corpus(&sc.input, CorpusFormat::DaTsv, parse_opts)?
        .data
        .into_segments()?;
    if records.is_empty() {
        return Err(Error::contract(format!("{} has no records to score", sc.input.display())));
    }
    let scorer = build_scorer(&params)?;
    let chunk = sc.chunk_size.max(1);

    let (preds, docs) = with_pool(cfg, || {
        if sc.doc {
            score_documents(&scorer, &records, opts, sc.weight_rule)
        } else {
            let parts: Vec<Vec<Prediction>> = records
                .par_chunks(chunk)
                .map(|c| scorer.score_batch(c, opts))
                .collect::<Result<_>>()?;
            Ok((parts.into_iter().flatten().collect(), Vec::new()))
        }
    })?;

    let rows: Vec<ScoreRow> = records.iter().zip(&preds).map(|(r, p)| ScoreRow::new(r, p)).collect();
    let scores_tsv = cfg.output_path("scores.tsv");
    write_scores(&scores_tsv, &rows)?;
    let scores_jsonl = cfg.output_path("scores.jsonl");
    write_atomic(&scores_jsonl, &scores_to_jsonl(&records, &preds)?)?;
    let docs_tsv = if sc.doc {
        let p = cfg.output_path("docs.tsv");
        write_atomic(&p, &docs_to_tsv(&docs)?)?;
        Some(p)
    } else {
        None
    };
    let meta = ScoreMeta {
        fingerprint: params.config.fingerprint(),
        model_mode: params.config.mode,
        scoring_mode: mode,
        checkpoint_sha256: short_sha256(&ckpt_bytes),
        segments: records.len(),
    };
    let mut meta_json = serde_json::to_vec_pretty(&meta)?;
    meta_json.push(b'\n');
    write_atomic(&meta_path(&scores_tsv), &meta_json)?;
    write_snapshot(cfg, "score")?;
    Ok(ScoreSummary {
        scores_tsv,
        scores_jsonl,
        docs_tsv,
        segments: records.len(),
        documents: docs.len(),
    })
}

/// `x.scores.tsv` becomes `x.scores.meta.json`.
pub fn meta_path(scores: &Path) -> PathBuf {
    let stem = scores
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scores".to_string());
    scores.with_file_name(format!("{stem}.meta.json"))
}

/// Groups records by `(system, doc)` in order of first appearance, scores
/// each document as one batch, and returns predictions in input order.
fn score_documents(
    scorer: &Scorer<'_>,
    records: &[SegmentRecord],
    opts: ScoreOptions,
    rule: crate::inference::WeightRule,
) -> Result<(Vec<Prediction>, Vec<DocScore>)> {
    let mut order: Vec<(&str, &str)> = Vec::new();
    let mut members: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let doc = r.doc_id.as_deref().ok_or_else(|| {
            Error::contract(format!("record `{}` has no doc id; document scoring needs a doc column", r.id))
        })?;
        let key = (r.system_id.as_str(), doc);
        members
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(i);
    }
    let results: Vec<(DocScore, Vec<Prediction>)> = order
        .par_iter()
        .map(|k| {
            let doc: Vec<SegmentRecord> = members[k].iter().map(|&i| records[i].clone()).collect();
            scorer.score_document(&doc, opts, rule)
        })
        .collect::<Result<_>>()?;
    let mut preds: Vec<Option<Prediction>> = vec![None; records.len()];
    let mut docs = Vec::with_capacity(results.len());
    for (k, (d, p)) in order.iter().zip(results) {
        for (&i, pred) in members[k].iter().zip(p) {
            preds[i] = Some(pred);
        }
        docs.push(d);
    }
    Ok((preds.into_iter().map(|p| p.expect("every record belongs to a document")).collect(), docs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateSummary {
    pub report_tsv: PathBuf,
    pub report_txt: PathBuf,
    pub report_json: PathBuf,
    pub sections: usize,
}

struct MetricInput {
    name: String,
    orientation: Orientation,
    scores: HashMap<String, f64>,
}

/// Correlates metric scores with human judgements and writes the report.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluateSummary> {
    let ec = section(&cfg.evaluate, "evaluate")?;
    let report = evaluate_report(cfg, ec)?;
    let report_tsv = cfg.output_path("report.tsv");
    let report_txt = cfg.output_path("report.txt");
    let report_json = cfg.output_path("report.json");
    write_atomic(&report_tsv, report.to_tsv()?.as_bytes())?;
    write_atomic(&report_txt, report.to_text()?.as_bytes())?;
    write_atomic(&report_json, report.to_json()?.as_bytes())?;
    write_snapshot(cfg, "evaluate")?;
    Ok(EvaluateSummary {
        report_tsv,
        report_txt,
        report_json,
        sections: report.sections.len(),
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Builds the report without writing it.
pub fn evaluate_report(cfg: &RunConfig, ec: &EvaluateConfig) -> Result<EvalReport> {
    let human_bytes = read_bytes(&ec.human)?;
    let human_opts = ParseOptions {
        score_kind: ec.score_kind,
        allow_missing_reference: true,
        require_score: true,
    };
    let human = parse_corpus(&ec.human, CorpusFormat::DaTsv, human_opts)?
        .data
        .into_segments()?;
    if human.is_empty() {
        return Err(Error::contract(format!("{} has no human judgements", ec.human.display())));
    }
    let human_orientation = Orientation::from_lower_is_better(ec.score_kind.lower_is_better());

    let metric_paths = if ec.metrics.is_empty() {
        BTreeMap::from([(cfg.run_name.clone(), cfg.output_path("scores.tsv"))])
    } else {
        ec.metrics.clone()
    };
    let mut metadata = ReportMetadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        ..ReportMetadata::default()
    };
    metadata.corpus_hashes.insert("human".to_string(), short_sha256(&human_bytes));
    metadata.counts.insert("human_segments".to_string(), human.len() as u64);
    let mut metrics = Vec::new();
    for (name, path) in &metric_paths {
        let bytes = read_bytes(path)?;
        metadata.corpus_hashes.insert(name.clone(), short_sha256(&bytes));
        if let Ok(meta) = read_bytes(&meta_path(path)) {
            let meta: ScoreMeta = serde_json::from_slice(&meta)?;
            metadata.fingerprints.insert(name.clone(), meta.fingerprint);
        }
        let rows = parse_corpus(path, CorpusFormat::ScoreTsv, ParseOptions::default())?
            .data
            .into_scores()?;
        let mut scores = HashMap::with_capacity(rows.len());
        for r in rows {
            if scores.insert(r.id.clone(), r.final_score).is_some() {
                return Err(Error::contract(format!("{}: duplicate id `{}`", path.display(), r.id)));
            }
        }
        metadata.counts.insert(format!("{name}_scores"), scores.len() as u64);
        metrics.push(MetricInput {
            name: name.clone(),
            orientation: Orientation::from_lower_is_better(ec.lower_is_better.contains(name)),
            scores,
        });
    }
    for name in &ec.lower_is_better {
        if !metric_paths.contains_key(name) {
            return Err(Error::contract(format!("lower_is_better names unknown metric `{name}`")));
        }
    }

    let mut by_lp: BTreeMap<&str, Vec<&SegmentRecord>> = BTreeMap::new();
    for r in &human {
        by_lp.entry(r.lang_pair.as_str()).or_default().push(r);
    }
    let per_lp: Vec<Vec<Measurement>> = with_pool(cfg, || {
        by_lp
            .par_iter()
            .map(|(lp, recs)| evaluate_lang_pair(lp, recs, &metrics, human_orientation, ec))
            .collect::<Result<_>>()
    })?;
    let measurements: Vec<Measurement> = per_lp.into_iter().flatten().collect();
    if measurements.is_empty() {
        return Err(Error::contract("no report sections are enabled"));
    }
    let layout = ReportLayout {
        precision: ec.precision,
        weighted: ec.weighted,
        ..ReportLayout::default()
    };
    build_report(&measurements, &layout, metadata)
}

fn cell_of(r: Result<f64>) -> Result<Cell> {
    match r {
        Ok(v) => Ok(Cell::Value(v)),
        Err(Error::UndefinedCorrelation(_)) => Ok(Cell::Undefined),
        Err(e) => Err(e),
    }
}

fn evaluate_lang_pair(
    lp: &str,
    recs: &[&SegmentRecord],
    metrics: &[MetricInput],
    human_orientation: Orientation,
    ec: &EvaluateConfig,
) -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    let human_of = |r: &SegmentRecord| human_orientation.apply(r.human_score.expect("parsed with scores required"));
    let owned: Vec<SegmentRecord> = recs.iter().map(|r| (*r).clone()).collect();
    let tuples = if ec.segment {
        Some(da_to_darr(&owned, ec.threshold)?)
    } else {
        None
    };

    for m in metrics {
        let present = recs.iter().filter(|r| m.scores.contains_key(&r.id)).count();
        if present == 0 {
            continue;
        }
        if present < recs.len() {
            let missing = recs.iter().find(|r| !m.scores.contains_key(&r.id)).expect("one is missing");
            return Err(Error::contract(format!(
                "metric `{}` has no score for record `{}` ({lp})",
                m.name, missing.id
            )));
        }
        let metric_of = |r: &SegmentRecord| m.orientation.apply(m.scores[&r.id]);
        let measure = |section: Section, cell: Cell, n: usize| Measurement {
            section,
            metric: m.name.clone(),
            lang_pair: lp.to_string(),
            cell,
            n: n as u64,
            lower_is_better: m.orientation.is_lower_better(),
        };

        if let Some(tuples) = &tuples {
            let scores: MetricScores = recs
                .iter()
                .map(|r| ((r.source.clone(), r.hypothesis.clone()), metric_of(r)))
                .collect();
            let (cell, n) = if tuples.is_empty() {
                (Cell::Undefined, 0)
            } else {
                let k = kendall_darr(tuples, &scores)?;
                (Cell::Value(k.tau), k.n_tuples as usize)
            };
            out.push(measure(Section::SegmentKendall, cell, n));
        }

        if ec.system || ec.top_n.is_some() {
            let mut sys_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            let mut sys_human: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in recs {
                sys_metric.entry(r.system_id.clone()).or_default().push(metric_of(r));
                sys_human.entry(r.system_id.clone()).or_default().push(human_of(r));
            }
            let avg = |m: BTreeMap<String, Vec<f64>>| -> Result<BTreeMap<String, f64>> {
                m.into_iter().map(|(k, v)| Ok((k, system_average(&v)?))).collect()
            };
            let (sm, sh) = (avg(sys_metric)?, avg(sys_human)?);
            let n = sm.len();
            if ec.system {
                let cell = if n < 2 {
                    Cell::Undefined
                } else {
                    let x: Vec<f64> = sm.values().copied().collect();
                    let y: Vec<f64> = sh.values().copied().collect();
                    cell_of(pearson_abs(&x, &y))?
                };
                out.push(measure(Section::SystemPearson, cell, n));
            }
            if let Some(top) = ec.top_n {
                let pairs = n.min(top) * n.min(top).saturating_sub(1) / 2;
                let cell = if top > n {
                    Cell::Undefined
                } else {
                    cell_of(topn_pairwise_kendall(&sm, &sh, top).map(|k| k.tau))?
                };
                out.push(measure(Section::TopNKendall { n: top }, cell, pairs));
            }
        }

        if ec.doc {
            let mut groups: BTreeMap<(&str, &str), Vec<&SegmentRecord>> = BTreeMap::new();
            for r in recs {
                if let Some(d) = r.doc_id.as_deref() {
                    groups.entry((r.system_id.as_str(), d)).or_default().push(r);
                }
            }
            let mut pairs: Vec<(DocScore, f64)> = Vec::with_capacity(groups.len());
            for ((sys, doc), rs) in &groups {
                let weights = rs.iter().map(|r| ec.weight_rule.weight(r)).collect::<Result<Vec<_>>>()?;
                let ms: Vec<f64> = rs.iter().map(|r| metric_of(r)).collect();
                let hs: Vec<f64> = rs.iter().map(|r| human_of(r)).collect();
                let md = doc_average(doc, sys, &ms, &weights)?;
                let hd = doc_average(doc, sys, &hs, &weights)?;
                pairs.push((md, ec.doc_average.pick(&hd)));
            }
            let cell = if pairs.len() < 2 {
                Cell::Undefined
            } else {
                cell_of(doc_pearson(&pairs, ec.doc_average))?
            };
            out.push(measure(
                Section::DocPearson {
                    average: ec.doc_average,
                },
                cell,
                pairs.len(),
            ));
        }
    }
    Ok(out)
}

/// Every stage whose section is present, in pipeline order.
pub fn cmd_all(cfg: &RunConfig) -> Result<()> {
    if cfg.ingest.is_some() {
        cmd_ingest(cfg)?;
    }
    if cfg.train.is_some() {
        cmd_train(cfg)?;
    }
    if cfg.score.is_some() {
        cmd_score(cfg)?;
    }
    if cfg.evaluate.is_some() {
        cmd_evaluate(cfg)?;
    }
    Ok(())
}
