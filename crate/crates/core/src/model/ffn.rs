//! Two-hidden-layer tanh regressor with manual backpropagation.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Ffn {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    /// Row-major `hidden1 × input`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `hidden2 × hidden1`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: f64,
}

/// Activations of one training-mode forward pass.
#[derive(Debug, Clone)]
pub struct FfnCache {
    pub x: Vec<f64>,
    /// Post-tanh, pre-dropout.
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    /// Dropout multipliers (0 or 1/(1−p)); all ones when dropout is off.
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub out: f64,
}

fn matvec(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    b.iter()
        .enumerate()
        .map(|(o, bias)| bias + w[o * n..(o + 1) * n].iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
        .collect()
}

fn check_finite(values: &[f64], layer: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(layer, "non-finite activation"));
    }
    Ok(())
}

impl Ffn {
    pub fn zeros(input: usize, hidden1: usize, hidden2: usize) -> Self {
        Ffn {
            input,
            hidden1,
            hidden2,
            w1: vec![0.0; hidden1 * input],
            b1: vec![0.0; hidden1],
            w2: vec![0.0; hidden2 * hidden1],
            b2: vec![0.0; hidden2],
            w3: vec![0.0; hidden2],
            b3: 0.0,
        }
    }

    /// Gaussian weights with variance `1/fan_in`, zero biases.
    pub fn init(input: usize, hidden1: usize, hidden2: usize, rng: &mut impl Rng) -> Self {
        let mut f = Ffn::zeros(input, hidden1, hidden2);
        let mut fill = |w: &mut Vec<f64>, fan_in: usize| {
            let n = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("valid std");
            for v in w.iter_mut() {
                *v = n.sample(rng);
            }
        };
        fill(&mut f.w1, input);
        fill(&mut f.w2, hidden1);
        fill(&mut f.w3, hidden2);
        f
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input {
            return Err(Error::contract(format!(
                "feature vector has length {}, the network expects {}",
                x.len(),
                self.input
            )));
        }
        Ok(())
    }

    /// Inference forward pass (dropout off).
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        check_finite(x, "input")?;
        let a1: Vec<f64> = matvec(&self.w1, &self.b1, x).into_iter().map(f64::tanh).collect();
        check_finite(&a1, "hidden layer 1")?;
        let a2: Vec<f64> = matvec(&self.w2, &self.b2, &a1).into_iter().map(f64::tanh).collect();
        check_finite(&a2, "hidden layer 2")?;
        let out = self.b3 + self.w3.iter().zip(&a2).map(|(w, a)| w * a).sum::<f64>();
        check_finite(&[out], "output layer")?;
        Ok(out)
    }

    /// Training forward pass with inverted dropout after each hidden
    /// activation. With `dropout == 0` no random numbers are drawn.
    pub fn forward_train(&self, x: &[f64], dropout: f64, rng: &mut impl Rng) -> Result<FfnCache> {
        self.check_input(x)?;
        check_finite(x, "input")?;
        let mask = |n: usize, rng: &mut dyn rand::RngCore| -> Vec<f64> {
            if dropout == 0.0 {
                return vec![1.0; n];
            }
            let keep = 1.0 / (1.0 - dropout);
            (0..n).map(|_| if rng.random::<f64>() < dropout { 0.0 } else { keep }).collect()
        };
        let a1: Vec<f64> = matvec(&self.w1, &self.b1, x).into_iter().map(f64::tanh).collect();
        check_finite(&a1, "hidden layer 1")?;
        let m1 = mask(self.hidden1, rng);
        let d1: Vec<f64> = a1.iter().zip(&m1).map(|(a, m)| a * m).collect();
        let a2: Vec<f64> = matvec(&self.w2, &self.b2, &d1).into_iter().map(f64::tanh).collect();
        check_finite(&a2, "hidden layer 2")?;
        let m2 = mask(self.hidden2, rng);
        let out = self.b3 + self.w3.iter().zip(a2.iter().zip(&m2)).map(|(w, (a, m))| w * a * m).sum::<f64>();
        check_finite(&[out], "output layer")?;
        Ok(FfnCache {
            x: x.to_vec(),
            a1,
            a2,
            m1,
            m2,
            out,
        })
    }

    /// Adds `dout · ∂out/∂θ` into `grads` and returns `dout · ∂out/∂x`.
    pub fn backward(&self, cache: &FfnCache, dout: f64, grads: &mut Ffn) -> Vec<f64> {
        let (h1, h2, n) = (self.hidden1, self.hidden2, self.input);
        grads.b3 += dout;
        let mut dz2 = vec![0.0; h2];
        for j in 0..h2 {
            let dropped = cache.a2[j] * cache.m2[j];
            grads.w3[j] += dout * dropped;
            dz2[j] = dout * self.w3[j] * cache.m2[j] * (1.0 - cache.a2[j] * cache.a2[j]);
        }
        let d1: Vec<f64> = cache.a1.iter().zip(&cache.m1).map(|(a, m)| a * m).collect();
        let mut dd1 = vec![0.0; h1];
        for j in 0..h2 {
            let g = dz2[j];
            grads.b2[j] += g;
            let row = &self.w2[j * h1..(j + 1) * h1];
            let grow = &mut grads.w2[j * h1..(j + 1) * h1];
            for i in 0..h1 {
                grow[i] += g * d1[i];
                dd1[i] += g * row[i];
            }
        }
        let mut dx = vec![0.0; n];
        for i in 0..h1 {
            let g = dd1[i] * cache.m1[i] * (1.0 - cache.a1[i] * cache.a1[i]);
            if g == 0.0 {
                continue;
            }
            grads.b1[i] += g;
            let row = &self.w1[i * n..(i + 1) * n];
            let grow = &mut grads.w1[i * n..(i + 1) * n];
            for k in 0..n {
                grow[k] += g * cache.x[k];
                dx[k] += g * row[k];
            }
        }
        dx
    }

    pub fn zeros_like(&self) -> Self {
        Ffn::zeros(self.input, self.hidden1, self.hidden2)
    }

    /// `(name, values)` for every tensor, in checkpoint order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("ffn.w1", &self.w1),
            ("ffn.b1", &self.b1),
            ("ffn.w2", &self.w2),
            ("ffn.b2", &self.b2),
            ("ffn.w3", &self.w3),
            ("ffn.b3", std::slice::from_ref(&self.b3)),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("ffn.w1", &mut self.w1),
            ("ffn.b1", &mut self.b1),
            ("ffn.w2", &mut self.w2),
            ("ffn.b2", &mut self.b2),
            ("ffn.w3", &mut self.w3),
            ("ffn.b3", std::slice::from_mut(&mut self.b3)),
        ]
    }
}
