//! Triplet ranking head: a shared linear projection followed by Euclidean
//! distances to the source and reference anchors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub dim: usize,
    /// Row-major `dim × dim`, no bias.
    pub w: Vec<f64>,
}

impl Projection {
    pub fn identity(dim: usize) -> Self {
        let mut w = vec![0.0; dim * dim];
        for i in 0..dim {
            w[i * dim + i] = 1.0;
        }
        Projection { dim, w }
    }

    pub fn zeros_like(&self) -> Self {
        Projection {
            dim: self.dim,
            w: vec![0.0; self.w.len()],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim;
        if x.len() != d {
            return Err(Error::contract(format!("embedding has dim {}, projection expects {d}", x.len())));
        }
        Ok((0..d)
            .map(|o| self.w[o * d..(o + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum())
            .collect())
    }

    /// Distance between the projections of `a` and `b`.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let pa = self.apply(a)?;
        let pb = self.apply(b)?;
        Ok(euclid(&pa, &pb))
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Dual-anchor hinge from the four anchor/hypothesis distances.
pub fn triplet_hinge(d_s_pos: f64, d_s_neg: f64, d_r_pos: f64, d_r_neg: f64, margin: f64) -> f64 {
    (d_s_pos - d_s_neg + margin).max(0.0) + (d_r_pos - d_r_neg + margin).max(0.0)
}

/// `1 / (1 + H)` where `H` is the harmonic mean of the two distances; `H`
/// is taken as 0 when either distance is 0.
pub fn inverted_harmonic(d_s: f64, d_r: f64) -> f64 {
    let h = if d_s == 0.0 || d_r == 0.0 {
        0.0
    } else {
        2.0 * d_s * d_r / (d_s + d_r)
    };
    1.0 / (1.0 + h)
}

/// Pooled embeddings of one ranking tuple.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TripletView<'a> {
    pub s: &'a [f64],
    pub r: &'a [f64],
    pub pos: &'a [f64],
    pub neg: &'a [f64],
}

/// Gradients of the hinge with respect to the projection and each input.
pub(crate) struct TripletGrads {
    pub ds: Vec<f64>,
    pub dr: Vec<f64>,
    pub dpos: Vec<f64>,
    pub dneg: Vec<f64>,
}

/// Loss of one tuple. Accumulates `scale · ∂loss/∂W` into `gw` and returns
/// the input gradients, also multiplied by `scale`.
pub(crate) fn triplet_backward(
    proj: &Projection,
    t: TripletView<'_>,
    margin: f64,
    scale: f64,
    gw: &mut Projection,
) -> Result<(f64, TripletGrads)> {
    let d = proj.dim;
    let ps = proj.apply(t.s)?;
    let pr = proj.apply(t.r)?;
    let pp = proj.apply(t.pos)?;
    let pn = proj.apply(t.neg)?;
    // gradient w.r.t. the projected vectors
    let mut g_ps = vec![0.0; d];
    let mut g_pr = vec![0.0; d];
    let mut g_pp = vec![0.0; d];
    let mut g_pn = vec![0.0; d];
    let mut loss = 0.0;
    for (anchor, g_anchor) in [(&ps, &mut g_ps), (&pr, &mut g_pr)] {
        let dp = euclid(anchor, &pp);
        let dn = euclid(anchor, &pn);
        let term = dp - dn + margin;
        if term <= 0.0 {
            continue;
        }
        loss += term;
        // ∂‖u‖/∂u = u/‖u‖, with 0 as the subgradient at the origin
        if dp > 0.0 {
            for k in 0..d {
                let u = (anchor[k] - pp[k]) / dp * scale;
                g_anchor[k] += u;
                g_pp[k] -= u;
            }
        }
        if dn > 0.0 {
            for k in 0..d {
                let u = (anchor[k] - pn[k]) / dn * scale;
                g_anchor[k] -= u;
                g_pn[k] += u;
            }
        }
    }
    let mut back = |x: &[f64], gy: &[f64]| -> Vec<f64> {
        let mut gx = vec![0.0; d];
        for o in 0..d {
            if gy[o] == 0.0 {
                continue;
            }
            let row = &proj.w[o * d..(o + 1) * d];
            let grow = &mut gw.w[o * d..(o + 1) * d];
            for i in 0..d {
                grow[i] += gy[o] * x[i];
                gx[i] += gy[o] * row[i];
            }
        }
        gx
    };
    let grads = TripletGrads {
        ds: back(t.s, &g_ps),
        dr: back(t.r, &g_pr),
        dpos: back(t.pos, &g_pp),
        dneg: back(t.neg, &g_pn),
    };
    Ok((loss, grads))
}
