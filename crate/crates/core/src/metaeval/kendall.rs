use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::DarrTuple;
use crate::error::{Error, Result};

/// Concordant/discordant counts and the resulting tau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KendallResult {
    pub concordant: u64,
    /// Includes pairs the metric scored as equal.
    pub discordant: u64,
    pub tau: f64,
    pub n_tuples: u64,
}

impl KendallResult {
    /// `(C - D) / (C + D)`; errors when there is nothing to count.
    pub fn from_counts(concordant: u64, discordant: u64) -> Result<Self> {
        let n = concordant + discordant;
        if n == 0 {
            return Err(Error::UndefinedCorrelation("no pairs to compare".to_string()));
        }
        Ok(KendallResult {
            concordant,
            discordant,
            tau: (concordant as f64 - discordant as f64) / n as f64,
            n_tuples: n,
        })
    }
}

/// Metric scores keyed by `(source, hypothesis)`.
pub type MetricScores = HashMap<(String, String), f64>;

/// Whether larger metric values mean better translations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    HigherIsBetter,
    LowerIsBetter,
}

impl Orientation {
    pub fn from_lower_is_better(lower: bool) -> Self {
        if lower {
            Orientation::LowerIsBetter
        } else {
            Orientation::HigherIsBetter
        }
    }

    pub fn is_lower_better(self) -> bool {
        self == Orientation::LowerIsBetter
    }

    /// Maps a raw value onto the higher-is-better scale.
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Orientation::HigherIsBetter => v,
            Orientation::LowerIsBetter => -v,
        }
    }
}

/// Segment-level Kendall tau over relative-ranking tuples. A tuple is
/// concordant only when the better hypothesis gets a strictly higher score.
pub fn kendall_darr(tuples: &[DarrTuple], scores: &MetricScores) -> Result<KendallResult> {
    kendall_darr_with(tuples, |src, hyp| scores.get(&(src.to_string(), hyp.to_string())).copied())
}

/// Like [`kendall_darr`] with an arbitrary score lookup.
pub fn kendall_darr_with(tuples: &[DarrTuple], lookup: impl Fn(&str, &str) -> Option<f64>) -> Result<KendallResult> {
    if tuples.is_empty() {
        return Err(Error::contract("no DARR tuples to evaluate"));
    }
    let (mut c, mut d) = (0u64, 0u64);
    for (i, t) in tuples.iter().enumerate() {
        let get = |hyp: &str, role: &str| {
            lookup(&t.source, hyp).ok_or_else(|| {
                Error::contract(format!(
                    "tuple {i} ({}): no metric score for the {role} hypothesis `{hyp}` of source `{}`",
                    t.lang_pair, t.source
                ))
            })
        };
        let better = get(&t.hyp_better, "better")?;
        let worse = get(&t.hyp_worse, "worse")?;
        if better > worse {
            c += 1;
        } else {
            d += 1;
        }
    }
    KendallResult::from_counts(c, d)
}

/// Pairwise tau over the `n` systems with the highest human scores.
///
/// Human-score ties are broken by system id, both when selecting the top `n`
/// and when ordering pairs. A pair is concordant when the metric strictly
/// prefers the system the humans ranked higher.
pub fn topn_pairwise_kendall(
    system_metric: &BTreeMap<String, f64>,
    system_human: &BTreeMap<String, f64>,
    n: usize,
) -> Result<KendallResult> {
    if n < 2 {
        return Err(Error::contract(format!("top-n comparison needs n >= 2, got {n}")));
    }
    if n > system_human.len() {
        return Err(Error::contract(format!(
            "top-{n} comparison requested but only {} systems have human scores",
            system_human.len()
        )));
    }
    let top = top_systems(system_human, n);
    let metric: Vec<f64> = top
        .iter()
        .map(|s| {
            system_metric
                .get(*s)
                .copied()
                .ok_or_else(|| Error::contract(format!("system `{s}` has no metric score")))
        })
        .collect::<Result<_>>()?;
    let (mut c, mut d) = (0u64, 0u64);
    for i in 0..top.len() {
        for j in i + 1..top.len() {
            if metric[i] > metric[j] {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    KendallResult::from_counts(c, d)
}

/// System ids ordered by descending human score, ties by ascending id,
/// truncated to `n`.
pub fn top_systems(system_human: &BTreeMap<String, f64>, n: usize) -> Vec<&str> {
    let mut all: Vec<(&str, f64)> = system_human.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    all.into_iter().take(n).map(|(k, _)| k).collect()
}
