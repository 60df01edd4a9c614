mod common;

use std::path::{Path, PathBuf};

use common::fixtures;
use mteval_core::corpus::tsv::write_segments;
use mteval_core::corpus::{compute_ter, SegmentRecord};
use mteval_core::model::load_params;
use mteval_core::pipeline::{cmd_all, cmd_evaluate, cmd_ingest, cmd_score, cmd_train, RunConfig};
use mteval_core::synthetic::{generate_da, SyntheticConfig};
use mteval_core::Error;

fn corpus(sources: usize, seed: u64, prefix: &str, lp: &str, second_reference: bool) -> Vec<SegmentRecord> {
    let cfg = SyntheticConfig {
        sources,
        seed,
        id_prefix: prefix.to_string(),
        lang_pair: lp.to_string(),
        second_reference,
        doc_size: 4,
        ..SyntheticConfig::default()
    };
    generate_da(&cfg, &fixtures::provider()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn load(path: &Path, overrides: &[(&str, &str)]) -> RunConfig {
    let ov: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    RunConfig::load(Some(path), &ov).unwrap()
}

fn full_run_config(data: &Path, out: &Path) -> String {
    format!(
        r#"
run_name = "demo"
output_dir = "{out}"
seed = 11
jobs = 2

[model]
epochs = 3

[train]
corpus = "{data}/train.tsv"

[score]
input = "{data}/test.tsv"
doc = true

[evaluate]
human = "{data}/test.tsv"
doc = true
top_n = 5
"#,
        out = out.display(),
        data = data.display()
    )
}

fn write_train_and_test(dir: &Path) {
    write_segments(&dir.join("train.tsv"), &corpus(60, 1, "tr", "xx-yy", false)).unwrap();
    let mut test = corpus(24, 2, "te", "xx-yy", false);
    test.extend(corpus(24, 3, "tf", "xx-zz", false));
    write_segments(&dir.join("test.tsv"), &test).unwrap();
}

#[test]
fn full_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    write_train_and_test(tmp.path());
    let cfg_path = write_config(tmp.path(), "run.toml", &full_run_config(tmp.path(), &out));
    cmd_all(&load(&cfg_path, &[])).unwrap();
    for suffix in [
        "train.config.toml",
        "score.config.toml",
        "evaluate.config.toml",
        "ckpt",
        "train_log.jsonl",
        "scores.tsv",
        "scores.jsonl",
        "scores.meta.json",
        "docs.tsv",
        "report.tsv",
        "report.txt",
        "report.json",
    ] {
        assert!(out.join(format!("demo.{suffix}")).is_file(), "missing demo.{suffix}");
    }
    let log = std::fs::read_to_string(out.join("demo.train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);
    let report = std::fs::read_to_string(out.join("demo.report.tsv")).unwrap();
    for key in ["segment_tau", "system_abs_pearson", "doc_pearson_micro", "top5_tau"] {
        assert!(report.contains(key), "{key} missing from\n{report}");
    }
    assert!(report.lines().next().unwrap().contains("xx-yy\txx-zz\tavg."));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("demo.report.json")).unwrap()).unwrap();
    assert_eq!(json["metadata"]["fingerprints"]["demo"].as_str().unwrap().len(), 16);
}

#[test]
fn snapshot_reruns_reproduce_the_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    write_train_and_test(tmp.path());
    let cfg_path = write_config(tmp.path(), "run.toml", &full_run_config(tmp.path(), &out));
    let cfg = load(&cfg_path, &[]);
    cmd_train(&cfg).unwrap();
    let first = std::fs::read(out.join("demo.ckpt")).unwrap();
    let snapshot = out.join("demo.train.config.toml");
    let again = load(&snapshot, &[("run_name", "again")]);
    assert_eq!(again.model_config().unwrap(), cfg.model_config().unwrap());
    cmd_train(&again).unwrap();
    assert_eq!(std::fs::read(out.join("again.ckpt")).unwrap(), first);
}

#[test]
fn overrides_change_the_seed_and_the_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    write_train_and_test(tmp.path());
    let cfg_path = write_config(tmp.path(), "run.toml", &full_run_config(tmp.path(), &out));
    let cfg = load(&cfg_path, &[("seed", "12"), ("model.hidden1", "64")]);
    cmd_train(&cfg).unwrap();
    let params = load_params(&out.join("demo.ckpt")).unwrap();
    assert_eq!((params.config.seed, params.config.hidden1), (12, 64));
}

#[test]
fn ranker_on_da_input_is_a_contract_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    write_train_and_test(tmp.path());
    let cfg_path = write_config(tmp.path(), "run.toml", &full_run_config(tmp.path(), &out));
    let cfg = load(&cfg_path, &[("model.mode", "RANKER"), ("train.format", "DA_TSV")]);
    let err = cmd_train(&cfg).unwrap_err();
    assert!(matches!(err, Error::Contract(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn missing_human_file_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg_path = write_config(
        tmp.path(),
        "run.toml",
        &format!(
            "output_dir = \"{}\"\n[evaluate]\nhuman = \"{}/nowhere.tsv\"\n",
            out.display(),
            tmp.path().display()
        ),
    );
    let err = cmd_evaluate(&load(&cfg_path, &[])).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("nowhere.tsv"), "{err}");
}

#[test]
fn ingest_builds_hter_targets_and_a_rejects_file() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("pe.tsv");
    std::fs::write(
        &input,
        "src\tmt\tref\tpe\tlp\n\
         quelle eins\tthe cat sat on the mat\tthe cat is on the mat\tthe cat sat on a mat\ten-de\n\
         quelle zwei\tfully correct output\tfully correct output\tfully correct output\ten-de\n\
         quelle drei\tno post edit\tsome reference\t\ten-de\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let cfg_path = write_config(
        tmp.path(),
        "run.toml",
        &format!(
            "output_dir = \"{}\"\n[ingest]\ninput = \"{}\"\nhter = true\n",
            out.display(),
            input.display()
        ),
    );
    let summary = cmd_ingest(&load(&cfg_path, &[])).unwrap();
    assert_eq!((summary.written, summary.rejected), (2, 1));
    assert_eq!(summary.rejects_path, tmp.path().join("pe.rejects.tsv"));
    let rejects = std::fs::read_to_string(&summary.rejects_path).unwrap();
    assert!(rejects.lines().next().unwrap().split('\t').any(|c| c == "reason"));
    assert_eq!(rejects.lines().count(), 2);

    let text = std::fs::read_to_string(&summary.output).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split('\t').collect();
    let col = header.iter().position(|c| *c == "score").unwrap();
    let scores: Vec<f64> = text.lines().skip(1).map(|l| l.split('\t').nth(col).unwrap().parse().unwrap()).collect();
    let toks = |s: &str| s.split(' ').map(str::to_string).collect::<Vec<_>>();
    let expected = compute_ter(&toks("the cat sat on the mat"), &toks("the cat sat on a mat")).unwrap().value;
    assert!((scores[0] - expected).abs() < 1e-9);
    assert!((expected - 1.0 / 6.0).abs() < 1e-12);
    assert_eq!(scores[1], 0.0);
}

#[test]
fn ingest_converts_da_to_darr_at_the_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("da.tsv");
    std::fs::write(
        &input,
        "src\tmt\tref\tscore\tsystem\tlp\n\
         s one\thyp a\tref one\t90\tA\ten-de\n\
         s one\thyp b\tref one\t60\tB\ten-de\n\
         s one\thyp c\tref one\t80\tC\ten-de\n\
         s two\thyp d\tref two\t50\tA\ten-de\n\
         s two\thyp e\tref two\t25\tB\ten-de\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let cfg_path = write_config(
        tmp.path(),
        "run.toml",
        &format!(
            "output_dir = \"{}\"\n[ingest]\ninput = \"{}\"\ndarr = true\nthreshold = 25\n",
            out.display(),
            input.display()
        ),
    );
    let summary = cmd_ingest(&load(&cfg_path, &[])).unwrap();
    // pairs at least 25 apart: (a, b) = 30 and (d, e) = 25
    assert_eq!(summary.written, 2);
    let text = std::fs::read_to_string(&summary.output).unwrap();
    assert!(text.contains("hyp a\thyp b") || text.contains("hyp a") && text.contains("hyp e"), "{text}");
}

fn train_small(tmp: &Path, mode: &str, records: &[SegmentRecord]) -> PathBuf {
    let data = tmp.join(format!("{mode}.train.tsv"));
    write_segments(&data, records).unwrap();
    let out = tmp.join("out");
    let cfg_path = write_config(
        tmp,
        &format!("{mode}.toml"),
        &format!(
            "run_name = \"{mode}\"\noutput_dir = \"{}\"\n[model]\nmode = \"{mode}\"\nepochs = 1\n[train]\ncorpus = \"{}\"\n",
            out.display(),
            data.display()
        ),
    );
    cmd_train(&load(&cfg_path, &[])).unwrap().checkpoint
}

#[test]
fn multi_reference_scoring_writes_six_permutations() {
    let tmp = tempfile::tempdir().unwrap();
    let ckpt = train_small(tmp.path(), "ESTIMATOR", &corpus(20, 5, "m", "xx-yy", false));
    let input = tmp.path().join("two_refs.tsv");
    write_segments(&input, &corpus(6, 6, "q", "xx-yy", true)).unwrap();
    let cfg_path = write_config(
        tmp.path(),
        "score.toml",
        &format!(
            "run_name = \"multi\"\noutput_dir = \"{}\"\n[score]\ncheckpoint = \"{}\"\ninput = \"{}\"\nmode = \"MULTI_REF\"\n",
            tmp.path().join("out").display(),
            ckpt.display(),
            input.display()
        ),
    );
    let summary = cmd_score(&load(&cfg_path, &[])).unwrap();
    assert_eq!(summary.segments, 30);
    let jsonl = std::fs::read_to_string(&summary.scores_jsonl).unwrap();
    for line in jsonl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["permutation_scores"].as_array().unwrap().len(), 6, "{line}");
    }
}

#[test]
fn qe_scoring_accepts_records_without_references() {
    let tmp = tempfile::tempdir().unwrap();
    let ckpt = train_small(tmp.path(), "QE_ESTIMATOR", &corpus(20, 5, "m", "xx-yy", false));
    let input = tmp.path().join("noref.tsv");
    std::fs::write(&input, "id\tsrc\tmt\tsystem\tlp\nq1\tein satz\ta sentence\tA\ten-de\nq2\tnoch einer\tanother one\tA\ten-de\n")
        .unwrap();
    let cfg_path = write_config(
        tmp.path(),
        "score.toml",
        &format!(
            "run_name = \"qe\"\noutput_dir = \"{}\"\n[score]\ncheckpoint = \"{}\"\ninput = \"{}\"\n",
            tmp.path().join("out").display(),
            ckpt.display(),
            input.display()
        ),
    );
    let summary = cmd_score(&load(&cfg_path, &[])).unwrap();
    assert_eq!(summary.segments, 2);
    let tsv = std::fs::read_to_string(&summary.scores_tsv).unwrap();
    assert!(tsv.contains("\tQE\t"), "{tsv}");
}

#[test]
fn document_scores_group_by_doc_id() {
    let tmp = tempfile::tempdir().unwrap();
    let ckpt = train_small(tmp.path(), "ESTIMATOR", &corpus(20, 5, "m", "xx-yy", false));
    let input = tmp.path().join("docs.tsv");
    write_segments(&input, &corpus(8, 7, "d", "xx-yy", false)).unwrap();
    let cfg_path = write_config(
        tmp.path(),
        "score.toml",
        &format!(
            "run_name = \"docs\"\noutput_dir = \"{}\"\n[score]\ncheckpoint = \"{}\"\ninput = \"{}\"\ndoc = true\nchunk_size = 3\n",
            tmp.path().join("out").display(),
            ckpt.display(),
            input.display()
        ),
    );
    let summary = cmd_score(&load(&cfg_path, &[])).unwrap();
    // 8 sources in documents of 4, for 5 systems
    assert_eq!(summary.documents, 10);
    let docs = std::fs::read_to_string(summary.docs_tsv.unwrap()).unwrap();
    assert_eq!(docs.lines().count(), 11);
}
