//! Two-layer ReLU network f(x) = W₂ᵀ ReLU(W₁x + b₁) + b₂ with manual backprop.
//!
//! Flattened parameter order: W₁ (row-major, h × d_in), b₁, W₂, b₂.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub d_in: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

pub fn param_count(d_in: usize, hidden: usize) -> usize {
    hidden * d_in + 2 * hidden + 1
}

impl MlpParams {
    pub fn from_flat(d_in: usize, hidden: usize, theta: &[f64]) -> Result<Self> {
        let n = param_count(d_in, hidden);
        if theta.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: theta.len(),
            });
        }
        let (w1, rest) = theta.split_at(hidden * d_in);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, rest) = rest.split_at(hidden);
        Ok(MlpParams {
            d_in,
            hidden,
            w1: w1.to_vec(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: rest[0],
        })
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(param_count(self.d_in, self.hidden));
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn num_params(&self) -> usize {
        param_count(self.d_in, self.hidden)
    }
}

/// Borrowed view over a flat parameter vector, avoiding copies in the hot loop.
#[derive(Clone, Copy)]
pub(crate) struct MlpView<'a> {
    d_in: usize,
    hidden: usize,
    theta: &'a [f64],
}

impl<'a> MlpView<'a> {
    pub(crate) fn new(d_in: usize, hidden: usize, theta: &'a [f64]) -> Result<Self> {
        let n = param_count(d_in, hidden);
        if theta.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: theta.len(),
            });
        }
        Ok(MlpView {
            d_in,
            hidden,
            theta,
        })
    }

    fn w1_row(&self, j: usize) -> &[f64] {
        &self.theta[j * self.d_in..(j + 1) * self.d_in]
    }

    fn b1(&self, j: usize) -> f64 {
        self.theta[self.hidden * self.d_in + j]
    }

    fn w2(&self, j: usize) -> f64 {
        self.theta[self.hidden * self.d_in + self.hidden + j]
    }

    fn b2(&self) -> f64 {
        self.theta[self.theta.len() - 1]
    }

    /// Output and hidden pre-activations for one input.
    fn forward_into(&self, x: &[f64], pre: &mut [f64]) -> f64 {
        let mut out = self.b2();
        for (j, slot) in pre.iter_mut().enumerate().take(self.hidden) {
            let z = crate::vector::dot(self.w1_row(j), x) + self.b1(j);
            *slot = z;
            if z > 0.0 {
                out += self.w2(j) * z;
            }
        }
        out
    }

    pub(crate) fn forward(&self, x: &[f64]) -> f64 {
        let mut pre = vec![0.0; self.hidden];
        self.forward_into(x, &mut pre)
    }

    /// Loss ½·mean (f(x)−y)² over the batch and its gradient.
    pub(crate) fn loss_and_grad(&self, xs: &[f64], ys: &[f64]) -> (f64, Vec<f64>) {
        let n = ys.len();
        let (h, d_in) = (self.hidden, self.d_in);
        let mut grad = vec![0.0; self.theta.len()];
        let mut pre = vec![0.0; h];
        let mut loss = 0.0;
        let inv = 1.0 / n as f64;
        let (gw1, rest) = grad.split_at_mut(h * d_in);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(h);
        for (i, &y) in ys.iter().enumerate() {
            let x = &xs[i * d_in..(i + 1) * d_in];
            let f = self.forward_into(x, &mut pre);
            let r = f - y;
            loss += 0.5 * r * r * inv;
            let dr = r * inv;
            gb2[0] += dr;
            for j in 0..h {
                if pre[j] > 0.0 {
                    gw2[j] += dr * pre[j];
                    let dz = dr * self.w2(j);
                    gb1[j] += dz;
                    for (g, xk) in gw1[j * d_in..(j + 1) * d_in].iter_mut().zip(x) {
                        *g += dz * xk;
                    }
                }
            }
        }
        (loss, grad)
    }

    pub(crate) fn loss(&self, xs: &[f64], ys: &[f64]) -> f64 {
        let mut pre = vec![0.0; self.hidden];
        let n = ys.len() as f64;
        ys.iter()
            .enumerate()
            .map(|(i, &y)| {
                let f = self.forward_into(&xs[i * self.d_in..(i + 1) * self.d_in], &mut pre);
                0.5 * (f - y) * (f - y) / n
            })
            .sum()
    }
}

pub fn forward(params: &MlpParams, x: &[f64]) -> f64 {
    let flat = params.flatten();
    MlpView::new(params.d_in, params.hidden, &flat)
        .expect("consistent params")
        .forward(x)
}

/// Mean squared difference between two networks' predictions over `inputs`
/// (row-major, n × d_in).
pub(crate) fn prediction_gap(
    d_in: usize,
    hidden: usize,
    student: &[f64],
    teacher: &[f64],
    inputs: &[f64],
) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::param("validation set is empty"));
    }
    if !inputs.len().is_multiple_of(d_in) {
        return Err(Error::param("validation inputs not a multiple of d_in"));
    }
    let s = MlpView::new(d_in, hidden, student)?;
    let t = MlpView::new(d_in, hidden, teacher)?;
    let mut ps = vec![0.0; hidden];
    let mut pt = vec![0.0; hidden];
    let n = inputs.len() / d_in;
    let total: f64 = inputs
        .chunks_exact(d_in)
        .map(|x| {
            let diff = s.forward_into(x, &mut ps) - t.forward_into(x, &mut pt);
            diff * diff
        })
        .sum();
    Ok(total / n as f64)
}
