mod common;

use std::path::Path;

use common::oracles::{all_strings, arrangements, exhaustive_ter_edits, lev_oracle, min_ter_edits};
use mteval_core::corpus::tsv::segments_to_tsv;
use mteval_core::corpus::{compute_ter, parse_corpus_bytes, CorpusFormat, ParseOptions, ScoreKind, SegmentRecord};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn ter_equals_exhaustive_search_on_all_small_pairs() {
    let strings = all_strings(b"abc", 5);
    let mut checked = 0usize;
    let mut mismatches = Vec::new();
    for hyp in &strings {
        let arr = arrangements(hyp);
        for target in strings.iter().filter(|t| !t.is_empty()) {
            let want = min_ter_edits(&arr, target);
            let got = compute_ter(hyp, target).unwrap();
            if got.edits != want || !got.exact {
                mismatches.push((hyp.clone(), target.clone(), got.edits, want));
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 364 * 363);
    assert!(mismatches.is_empty(), "{} mismatches, first {:?}", mismatches.len(), &mismatches[..1]);
}

#[test]
fn shift_free_ter_is_levenshtein_over_target_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut cases = 0;
    while cases < 1000 {
        let len = |rng: &mut ChaCha8Rng, lo| rng.random_range(lo..=6usize);
        let (hl, tl) = (len(&mut rng, 0), len(&mut rng, 1));
        let hyp: Vec<u8> = (0..hl).map(|_| rng.random_range(b'a'..=b'e')).collect();
        let target: Vec<u8> = (0..tl).map(|_| rng.random_range(b'a'..=b'e')).collect();
        let lev = lev_oracle(&hyp, &target);
        if exhaustive_ter_edits(&hyp, &target) != lev {
            continue;
        }
        let got = compute_ter(&hyp, &target).unwrap();
        assert_eq!(got.value, lev as f64 / target.len() as f64, "{hyp:?} {target:?}");
        cases += 1;
    }
}

fn tokens(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(b'a'..=b'd', 0..=max)
}

proptest! {
    #[test]
    fn ter_of_identical_inputs_is_zero(x in prop::collection::vec(0u16..50, 1..30)) {
        let s = compute_ter(&x, &x).unwrap();
        prop_assert_eq!((s.edits, s.value), (0, 0.0));
    }

    #[test]
    fn appending_an_aligned_token_matches_the_oracle(hyp in tokens(5), target in tokens(5), t in b'a'..=b'e') {
        prop_assume!(!target.is_empty());
        let (mut h2, mut r2) = (hyp.clone(), target.clone());
        h2.push(t);
        r2.push(t);
        let before = compute_ter(&hyp, &target).unwrap().edits;
        let after = compute_ter(&h2, &r2).unwrap().edits;
        prop_assert_eq!(after, exhaustive_ter_edits(&h2, &r2));
        prop_assert!(after <= before);
    }
}

fn text() -> impl Strategy<Value = String> {
    "[ a-zA-Z0-9.,;:!?'\"#|àéßüñ\u{4e2d}\u{1F600}-]{0,12}[a-zA-Z\u{00e9}\u{4e2d}]"
}

fn record() -> impl Strategy<Value = SegmentRecord> {
    (
        "[a-z0-9]{1,6}",
        text(),
        text(),
        prop::collection::vec(text(), 1..=3),
        0u8..=100,
        "[A-Za-z0-9_]{1,6}",
        prop::option::of("[a-z0-9-]{1,6}"),
        "[a-z]{2}-[a-z]{2}",
    )
        .prop_map(|(id, source, hypothesis, references, score, system, doc, lp)| SegmentRecord {
            id,
            lang_pair: lp,
            source,
            hypothesis,
            references,
            human_score: Some(f64::from(score)),
            score_kind: ScoreKind::Da,
            system_id: system,
            doc_id: doc,
            seg_index: None,
            line: None,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn parse_then_write_is_byte_identical(records in prop::collection::vec(record(), 1..12)) {
        let mut records = records;
        for (i, r) in records.iter_mut().enumerate() {
            r.id = format!("{}-{i}", r.id);
        }
        let k = records.iter().map(|r| r.references.len()).max().unwrap();
        for r in &mut records {
            r.references.resize(k, "filler".to_string());
        }
        let bytes = segments_to_tsv(&records).unwrap();
        let parsed = parse_corpus_bytes(Path::new("mem.tsv"), &bytes, CorpusFormat::DaTsv, ParseOptions::default())
            .unwrap();
        prop_assert!(parsed.rejects.is_empty(), "{:?}", parsed.rejects);
        let back = parsed.data.into_segments().unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in records.iter().zip(&back) {
            prop_assert_eq!(&a.source, &b.source);
            prop_assert_eq!(&a.hypothesis, &b.hypothesis);
            prop_assert_eq!(&a.references, &b.references);
        }
        prop_assert_eq!(segments_to_tsv(&back).unwrap(), bytes);
    }
}

#[test]
fn hand_written_file_keeps_its_text_columns() {
    let input = "lp\tscore\tmt\tsrc\tref\tsystem\n\
                 en-de\t71\t \"Hallo\"  Welt \t  Hello   world\tHallo, Welt!\tsysA\n\
                 en-de\t12\tx\ty\tz\tsysB\n";
    let parsed =
        parse_corpus_bytes(Path::new("hand.tsv"), input.as_bytes(), CorpusFormat::DaTsv, ParseOptions::default())
            .unwrap();
    let recs = parsed.data.into_segments().unwrap();
    assert_eq!(recs[0].hypothesis, " \"Hallo\"  Welt ");
    assert_eq!(recs[0].source, "  Hello   world");
    assert_eq!(recs[0].references, vec!["Hallo, Welt!".to_string()]);
    let again = parse_corpus_bytes(
        Path::new("again.tsv"),
        &segments_to_tsv(&recs).unwrap(),
        CorpusFormat::DaTsv,
        ParseOptions::default(),
    )
    .unwrap()
    .data
    .into_segments()
    .unwrap();
    for (a, b) in recs.iter().zip(&again) {
        assert_eq!((&a.source, &a.hypothesis, &a.references), (&b.source, &b.hypothesis, &b.references));
    }
}
