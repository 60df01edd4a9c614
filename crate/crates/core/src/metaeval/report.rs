//! Assembly and rendering of evaluation tables: one row per metric, one
//! column per language pair, and a trailing average column.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::correlation::DocAverage;
use crate::error::{Error, Result};

/// One table of the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Section {
    SegmentKendall,
    SystemPearson,
    DocPearson { average: DocAverage },
    TopNKendall { n: usize },
}

impl Section {
    pub fn key(self) -> String {
        match self {
            Section::SegmentKendall => "segment_tau".to_string(),
            Section::SystemPearson => "system_abs_pearson".to_string(),
            Section::DocPearson { average } => format!("doc_pearson_{}", average.as_str()),
            Section::TopNKendall { n } => format!("top{n}_tau"),
        }
    }

    pub fn title(self) -> String {
        match self {
            Section::SegmentKendall => "Segment-level Kendall's tau".to_string(),
            Section::SystemPearson => "System-level |Pearson|".to_string(),
            Section::DocPearson { average } => format!("Document-level Pearson r ({} average)", average.as_str()),
            Section::TopNKendall { n } => format!("Top-{n} system-level Kendall's tau"),
        }
    }

    pub fn count_label(self) -> &'static str {
        match self {
            Section::SegmentKendall => "n tuples",
            Section::SystemPearson => "n systems",
            Section::DocPearson { .. } => "n documents",
            Section::TopNKendall { .. } => "n pairs",
        }
    }
}

/// A computed statistic, or a correlation that is undefined on this data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Cell {
    Value(f64),
    Undefined,
}

/// One statistic for one metric on one language pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub section: Section,
    pub metric: String,
    pub lang_pair: String,
    pub cell: Cell,
    /// Tuples, systems, documents or pairs behind the value.
    pub n: u64,
    pub lower_is_better: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLayout {
    /// Decimal places in the TSV and text renderings.
    pub precision: usize,
    /// Weight the average column by the per-language-pair counts.
    pub weighted: bool,
    /// Values backed by fewer items than this are flagged.
    pub low_n_below: u64,
}

impl Default for ReportLayout {
    fn default() -> Self {
        ReportLayout {
            precision: 4,
            weighted: false,
            low_n_below: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    /// Model fingerprint per metric, where the metric is a trained model.
    pub fingerprints: BTreeMap<String, String>,
    /// Content hash per input file label.
    pub corpus_hashes: BTreeMap<String, String>,
    pub counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub metric: String,
    pub lower_is_better: bool,
    /// Absent language pairs render as "-".
    pub cells: BTreeMap<String, Cell>,
    pub average: Option<f64>,
    /// Language pairs whose value rests on too few items.
    pub low_n: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSection {
    pub section: Section,
    pub lang_pairs: Vec<String>,
    pub counts: BTreeMap<String, u64>,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: ReportMetadata,
    pub layout: ReportLayout,
    pub sections: Vec<ReportSection>,
}

/// Formats with `precision` decimals, never printing a negative zero.
pub fn format_value(v: f64, precision: usize) -> String {
    let s = format!("{v:.precision$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn displayed(v: f64, precision: usize) -> f64 {
    format_value(v, precision).parse().expect("formatted float parses")
}

/// Mean of the displayed values, optionally weighted by `weights`.
fn average_of(values: &[(f64, f64)], weighted: bool) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    if weighted {
        let total: f64 = values.iter().map(|(_, w)| w).sum();
        if total > 0.0 {
            return Some(values.iter().map(|(v, w)| v * w).sum::<f64>() / total);
        }
    }
    Some(values.iter().map(|(v, _)| v).sum::<f64>() / values.len() as f64)
}

/// Groups measurements into sections and computes the average column.
pub fn build_report(results: &[Measurement], layout: &ReportLayout, metadata: ReportMetadata) -> Result<EvalReport> {
    if results.is_empty() {
        return Err(Error::contract("a report needs at least one language-pair result"));
    }
    let mut grouped: BTreeMap<Section, BTreeMap<&str, Vec<&Measurement>>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for m in results {
        if !seen.insert((m.section, m.metric.as_str(), m.lang_pair.as_str())) {
            return Err(Error::contract(format!(
                "duplicate result for {} / {} / {}",
                m.section.key(),
                m.metric,
                m.lang_pair
            )));
        }
        grouped.entry(m.section).or_default().entry(&m.metric).or_default().push(m);
    }
    let mut sections = Vec::new();
    for (section, metrics) in grouped {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for m in metrics.values().flatten() {
            let c = counts.entry(m.lang_pair.clone()).or_insert(0);
            *c = (*c).max(m.n);
        }
        let lang_pairs: Vec<String> = counts.keys().cloned().collect();
        let mut rows = Vec::new();
        for (metric, ms) in metrics {
            let lower_is_better = ms.iter().any(|m| m.lower_is_better);
            let cells: BTreeMap<String, Cell> = ms.iter().map(|m| (m.lang_pair.clone(), m.cell)).collect();
            let shown: Vec<(f64, f64)> = cells
                .iter()
                .filter_map(|(lp, c)| match c {
                    Cell::Value(v) => Some((displayed(*v, layout.precision), counts[lp] as f64)),
                    Cell::Undefined => None,
                })
                .collect();
            let low_n = ms
                .iter()
                .filter(|m| m.n < layout.low_n_below)
                .map(|m| m.lang_pair.clone())
                .collect();
            rows.push(ReportRow {
                metric: metric.to_string(),
                lower_is_better,
                cells,
                average: average_of(&shown, layout.weighted),
                low_n,
            });
        }
        sections.push(ReportSection {
            section,
            lang_pairs,
            counts,
            rows,
        });
    }
    Ok(EvalReport {
        metadata,
        layout: layout.clone(),
        sections,
    })
}

impl EvalReport {
    fn all_lang_pairs(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.sections.iter().flat_map(|s| &s.lang_pairs).collect();
        set.into_iter().cloned().collect()
    }

    fn cell_text(&self, row: &ReportRow, lp: &str) -> String {
        match row.cells.get(lp) {
            None => "-".to_string(),
            Some(Cell::Undefined) => "NA".to_string(),
            Some(Cell::Value(v)) => format_value(*v, self.layout.precision),
        }
    }

    fn avg_text(&self, row: &ReportRow) -> String {
        row.average
            .map_or_else(|| "-".to_string(), |v| format_value(v, self.layout.precision))
    }

    /// Errors if an average cannot be recomputed from the displayed row.
    pub fn verify(&self) -> Result<()> {
        for s in &self.sections {
            for row in &s.rows {
                let shown: Vec<(f64, f64)> = s
                    .lang_pairs
                    .iter()
                    .filter_map(|lp| self.cell_text(row, lp).parse().ok().map(|v| (v, s.counts[lp] as f64)))
                    .collect();
                let recomputed = average_of(&shown, self.layout.weighted)
                    .map_or_else(|| "-".to_string(), |v| format_value(v, self.layout.precision));
                if recomputed != self.avg_text(row) {
                    return Err(Error::contract(format!(
                        "average of {} in {} does not match its row ({} vs {})",
                        row.metric,
                        s.section.key(),
                        self.avg_text(row),
                        recomputed
                    )));
                }
            }
        }
        Ok(())
    }

    /// One table with a column per language pair across all sections.
    pub fn to_tsv(&self) -> Result<String> {
        self.verify()?;
        let lps = self.all_lang_pairs();
        let mut out = String::new();
        let _ = writeln!(out, "section\tmetric\t{}\tavg.", lps.join("\t"));
        for s in &self.sections {
            let counts: Vec<String> = lps
                .iter()
                .map(|lp| s.counts.get(lp).map_or_else(|| "-".to_string(), u64::to_string))
                .collect();
            let _ = writeln!(out, "{}\t{}\t{}\t-", s.section.key(), s.section.count_label(), counts.join("\t"));
            for row in &s.rows {
                let cells: Vec<String> = lps.iter().map(|lp| self.cell_text(row, lp)).collect();
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}",
                    s.section.key(),
                    row.metric,
                    cells.join("\t"),
                    self.avg_text(row)
                );
            }
        }
        Ok(out)
    }

    /// Aligned plain-text tables, one per section.
    pub fn to_text(&self) -> Result<String> {
        self.verify()?;
        let mut out = String::new();
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let mut table: Vec<Vec<String>> = Vec::new();
            let mut header = vec!["metric".to_string()];
            header.extend(s.lang_pairs.iter().cloned());
            header.push("avg.".to_string());
            table.push(header);
            let mut counts = vec![s.section.count_label().to_string()];
            counts.extend(s.lang_pairs.iter().map(|lp| s.counts[lp].to_string()));
            counts.push(String::new());
            table.push(counts);
            let mut notes = Vec::new();
            for row in &s.rows {
                let mut name = row.metric.clone();
                if row.lower_is_better {
                    name.push_str(" (negated)");
                }
                let mut line = vec![name];
                line.extend(s.lang_pairs.iter().map(|lp| self.cell_text(row, lp)));
                line.push(self.avg_text(row));
                table.push(line);
                for lp in &row.low_n {
                    notes.push(format!(
                        "note: {} on {lp} rests on {} item(s)",
                        row.metric,
                        s.counts.get(lp).copied().unwrap_or(0)
                    ));
                }
            }
            let widths: Vec<usize> = (0..table[0].len())
                .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
                .collect();
            let _ = writeln!(out, "{}", s.section.title());
            for r in &table {
                let cells: Vec<String> = r
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                    .collect();
                let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            }
            for n in notes {
                let _ = writeln!(out, "{n}");
            }
        }
        if self.layout.weighted {
            out.push_str("\naverages weighted by item counts\n");
        }
        Ok(out)
    }

    /// Full-precision JSON with metadata.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(metric: &str, lp: &str, v: f64) -> Measurement {
        Measurement {
            section: Section::SegmentKendall,
            metric: metric.into(),
            lang_pair: lp.into(),
            cell: Cell::Value(v),
            n: 100,
            lower_is_better: false,
        }
    }

    fn report(ms: &[Measurement]) -> EvalReport {
        build_report(ms, &ReportLayout::default(), ReportMetadata::default()).unwrap()
    }

    #[test]
    fn unweighted_average() {
        let r = report(&[m("a", "de-en", 0.4), m("a", "en-de", 0.6)]);
        assert_eq!(r.sections[0].rows[0].average, Some(0.5));
    }

    #[test]
    fn single_pair_average_is_itself() {
        let r = report(&[m("a", "de-en", 0.4321)]);
        assert_eq!(r.sections[0].rows[0].average, Some(0.4321));
    }

    #[test]
    fn missing_pair_is_dash_and_excluded() {
        let r = report(&[m("a", "de-en", 0.2), m("a", "en-gu", 0.4), m("b", "de-en", 0.3)]);
        let tsv = r.to_tsv().unwrap();
        assert!(tsv.contains("segment_tau\tb\t0.3000\t-\t0.3000\n"), "{tsv}");
        assert!(tsv.contains("segment_tau\ta\t0.2000\t0.4000\t0.3000\n"), "{tsv}");
        assert!(tsv.contains("segment_tau\tn tuples\t100\t100\t-\n"), "{tsv}");
    }

    #[test]
    fn undefined_is_na_and_excluded() {
        let mut u = m("a", "en-de", 0.0);
        u.cell = Cell::Undefined;
        let r = report(&[m("a", "de-en", 0.2), u]);
        assert_eq!(r.sections[0].rows[0].average, Some(0.2));
        assert!(r.to_text().unwrap().contains("NA"));
    }

    #[test]
    fn weighted_average_uses_counts() {
        let mut a = m("a", "de-en", 0.2);
        a.n = 1;
        let mut b = m("a", "en-de", 0.6);
        b.n = 3;
        let layout = ReportLayout {
            weighted: true,
            ..Default::default()
        };
        let r = build_report(&[a, b], &layout, ReportMetadata::default()).unwrap();
        assert!((r.sections[0].rows[0].average.unwrap() - 0.5).abs() < 1e-12);
        assert!(r.to_text().unwrap().contains("weighted"));
    }

    #[test]
    fn low_n_is_flagged() {
        let mut a = m("a", "de-en", 1.0);
        a.section = Section::DocPearson {
            average: DocAverage::Micro,
        };
        a.n = 2;
        let r = report(&[a]);
        assert_eq!(r.sections[0].rows[0].low_n, vec!["de-en".to_string()]);
        assert!(r.to_text().unwrap().contains("rests on 2 item(s)"));
    }

    #[test]
    fn duplicates_and_empty_input_are_rejected() {
        assert!(build_report(&[], &ReportLayout::default(), ReportMetadata::default()).is_err());
        let d = [m("a", "de-en", 0.1), m("a", "de-en", 0.2)];
        assert!(build_report(&d, &ReportLayout::default(), ReportMetadata::default()).is_err());
    }

    #[test]
    fn negative_zero_is_not_printed() {
        assert_eq!(format_value(-0.00001, 4), "0.0000");
        assert_eq!(format_value(-0.5, 1), "-0.5");
    }

    #[test]
    fn json_round_trips() {
        let r = report(&[m("a", "de-en", 0.123456789)]);
        let back: EvalReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
