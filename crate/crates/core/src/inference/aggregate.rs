use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Arithmetic mean computed as `min + mean(x − min)` over the sorted input,
/// so the result does not depend on input order and a constant input is
/// returned exactly.
fn shifted_mean(sorted: &[f64]) -> f64 {
    let lo = sorted[0];
    let dev: f64 = sorted.iter().map(|x| x - lo).sum();
    lo + dev / sorted.len() as f64
}

/// `(mean, population stdev, mean · (1 − stdev))`. The factor is not
/// clamped, so a spread above 1 flips the sign of the final score.
pub fn aggregate(scores: &[f64]) -> Result<(f64, f64, f64)> {
    if scores.is_empty() {
        return Err(Error::contract("cannot aggregate an empty score list"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::numeric("aggregate", "non-finite permutation score"));
    }
    let v = sorted(scores);
    let mean = shifted_mean(&v);
    let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    sq.sort_by(f64::total_cmp);
    let stdev = (sq.iter().sum::<f64>() / v.len() as f64).sqrt();
    Ok((mean, stdev, mean * (1.0 - stdev)))
}

/// Unweighted, order-independent mean of segment scores.
pub fn system_average(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::contract("cannot average an empty system"));
    }
    Ok(shifted_mean(&sorted(scores)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocScore {
    pub doc_id: String,
    pub system_id: String,
    /// Length-weighted mean of the segment scores.
    pub micro: f64,
    /// Unweighted mean of the segment scores.
    #[serde(rename = "macro")]
    pub macro_avg: f64,
    pub segment_count: usize,
    pub total_weight: f64,
}

fn weighted_mean(scores: &[f64], weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::contract("document has zero total weight"));
    }
    let num: f64 = scores.iter().zip(weights).map(|(s, w)| s * w).sum();
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((num / total).clamp(lo, hi))
}

/// Micro (weighted) and macro (unweighted) averages of one document's
/// segment scores, in document order.
pub fn doc_average(doc_id: &str, system_id: &str, scores: &[f64], weights: &[f64]) -> Result<DocScore> {
    if scores.is_empty() {
        return Err(Error::contract(format!("document `{doc_id}` has no segments")));
    }
    if scores.len() != weights.len() {
        return Err(Error::contract("one weight per segment is required"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::contract("segment weights must be finite and non-negative"));
    }
    let ones = vec![1.0; scores.len()];
    Ok(DocScore {
        doc_id: doc_id.to_string(),
        system_id: system_id.to_string(),
        micro: weighted_mean(scores, weights)?,
        macro_avg: weighted_mean(scores, &ones)?,
        segment_count: scores.len(),
        total_weight: weights.iter().sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[0.5]).unwrap(), (0.5, 0.0, 0.5));
        assert_eq!(aggregate(&[1.0, 0.0]).unwrap(), (0.5, 0.5, 0.25));
        let (m, s, f) = aggregate(&[0.5, 0.7]).unwrap();
        assert!((m - 0.6).abs() < 1e-12 && (s - 0.1).abs() < 1e-12 && (f - 0.54).abs() < 1e-12);
        let (m, s, f) = aggregate(&[0.6, 0.6, 0.6, 0.6, 0.9, 0.9]).unwrap();
        assert!((m - 0.7).abs() < 1e-12);
        assert!((s - 0.02f64.sqrt()).abs() < 1e-12);
        assert!((f - 0.6010).abs() < 1e-4);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn constant_inputs_are_exact() {
        for c in [0.7, 0.1, -3.3, 1e-300, 0.123456789] {
            assert_eq!(aggregate(&[c; 6]).unwrap(), (c, 0.0, c));
        }
    }

    #[test]
    fn spread_above_one_is_not_clamped() {
        let (m, s, f) = aggregate(&[3.0, -1.0]).unwrap();
        assert_eq!((m, s), (1.0, 2.0));
        assert_eq!(f, -1.0);
    }

    #[test]
    fn document_examples() {
        let d = doc_average("d", "sys", &[0.8, 0.4], &[10.0, 30.0]).unwrap();
        assert_eq!(d.micro, 0.5);
        assert!((d.macro_avg - 0.6).abs() < 1e-15);
        let single = doc_average("d", "sys", &[0.3], &[7.0]).unwrap();
        assert_eq!((single.micro, single.macro_avg), (0.3, 0.3));
        assert!(doc_average("d", "sys", &[0.3], &[0.0]).is_err());
    }

    #[test]
    fn system_examples() {
        assert!((system_average(&[0.2, 0.4, 0.9]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(system_average(&[0.25]).unwrap(), 0.25);
        assert!(system_average(&[]).is_err());
    }

    proptest! {
        #[test]
        fn aggregate_ignores_order(mut v in prop::collection::vec(-2.0f64..2.0, 1..10), seed in 0u64..100) {
            let a = aggregate(&v).unwrap();
            let n = v.len();
            v.rotate_left((seed as usize) % n);
            v.swap(0, n - 1);
            let b = aggregate(&v).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn micro_is_bounded_and_equal_weights_give_macro(
            pairs in prop::collection::vec((0.0f64..1.0, 0.1f64..50.0), 1..20),
            w in 0.1f64..10.0,
        ) {
            let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let d = doc_average("d", "s", &scores, &weights).unwrap();
            let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(d.micro >= lo && d.micro <= hi);
            let eq = doc_average("d", "s", &scores, &vec![w; scores.len()]).unwrap();
            prop_assert!((eq.micro - eq.macro_avg).abs() <= 1e-12);
            let ones = doc_average("d", "s", &scores, &vec![1.0; scores.len()]).unwrap();
            prop_assert_eq!(ones.micro, ones.macro_avg);
        }
    }
}
