use crate::encoder::SegmentEmbedding;
use crate::error::{Error, Result};

/// Concatenates `[a; h; b]` (or `[a; h]` without `b`). With `extra`, each
/// anchor slot also contributes `|a−h|` and `a⊙h`, appended after the plain
/// blocks in slot order.
pub fn feature_vector(
    anchor_a: &SegmentEmbedding,
    hyp: &SegmentEmbedding,
    anchor_b: Option<&SegmentEmbedding>,
    extra: bool,
) -> Result<Vec<f64>> {
    anchor_a.check_compatible([hyp].into_iter().chain(anchor_b))?;
    Ok(raw_features(anchor_a.vector(), hyp.vector(), anchor_b.map(|b| b.vector()), extra))
}

pub(crate) fn raw_features(a: &[f64], h: &[f64], b: Option<&[f64]>, extra: bool) -> Vec<f64> {
    let d = a.len();
    let slots = if b.is_some() { 3 } else { 2 };
    let anchors = slots - 1;
    let mut out = Vec::with_capacity(d * (slots + if extra { 2 * anchors } else { 0 }));
    out.extend_from_slice(a);
    out.extend_from_slice(h);
    if let Some(b) = b {
        out.extend_from_slice(b);
    }
    if extra {
        for anchor in std::iter::once(a).chain(b) {
            out.extend(anchor.iter().zip(h).map(|(x, y)| (x - y).abs()));
            out.extend(anchor.iter().zip(h).map(|(x, y)| x * y));
        }
    }
    out
}

/// Splits the gradient of a feature vector back onto its inputs:
/// returns `(da, dh, db)`; `db` is empty without a third slot.
pub(crate) fn features_backward(
    a: &[f64],
    h: &[f64],
    b: Option<&[f64]>,
    extra: bool,
    dx: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = a.len();
    let mut da = dx[..d].to_vec();
    let mut dh = dx[d..2 * d].to_vec();
    let mut db = if b.is_some() { dx[2 * d..3 * d].to_vec() } else { Vec::new() };
    if extra {
        let mut offset = if b.is_some() { 3 * d } else { 2 * d };
        for (slot, anchor) in std::iter::once(a).chain(b).enumerate() {
            let d_abs = &dx[offset..offset + d];
            let d_mul = &dx[offset + d..offset + 2 * d];
            let target = if slot == 0 { &mut da } else { &mut db };
            for k in 0..d {
                let diff = anchor[k] - h[k];
                let sign = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                target[k] += d_abs[k] * sign + d_mul[k] * h[k];
                dh[k] += -d_abs[k] * sign + d_mul[k] * anchor[k];
            }
            offset += 2 * d;
        }
    }
    (da, dh, db)
}

pub(crate) fn check_dim(e: &SegmentEmbedding, dim: usize) -> Result<()> {
    if e.dim() != dim {
        return Err(Error::contract(format!(
            "embedding has dim {} but the model expects {dim}",
            e.dim()
        )));
    }
    Ok(())
}
