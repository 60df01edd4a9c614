use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::DocScore;

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::contract(format!(
            "correlation needs vectors of equal length, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::contract("correlation needs at least two points"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::contract("correlation inputs must be finite"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let constant = |v: &[f64]| v.iter().all(|e| *e == v[0]);
    if constant(x) || constant(y) || sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("one of the vectors is constant".to_string()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Absolute value of the sample Pearson correlation.
pub fn pearson_abs(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(x, y).map(f64::abs)
}

/// Which document average to correlate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocAverage {
    #[default]
    Micro,
    Macro,
}

impl DocAverage {
    pub fn as_str(self) -> &'static str {
        match self {
            DocAverage::Micro => "micro",
            DocAverage::Macro => "macro",
        }
    }

    pub fn pick(self, d: &DocScore) -> f64 {
        match self {
            DocAverage::Micro => d.micro,
            DocAverage::Macro => d.macro_avg,
        }
    }
}

impl FromStr for DocAverage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "micro" => Ok(DocAverage::Micro),
            "macro" => Ok(DocAverage::Macro),
            other => Err(Error::contract(format!("unknown document average `{other}`"))),
        }
    }
}

/// Signed Pearson correlation between document scores and human document
/// scores.
pub fn doc_pearson(docs: &[(DocScore, f64)], average: DocAverage) -> Result<f64> {
    let x: Vec<f64> = docs.iter().map(|(d, _)| average.pick(d)).collect();
    let y: Vec<f64> = docs.iter().map(|(_, h)| *h).collect();
    pearson(&x, &y)
}
