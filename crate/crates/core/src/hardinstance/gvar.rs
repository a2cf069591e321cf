//! L^p norms of gradient-field differences over the box [−w, w]^d and the
//! gradient-variation functional GVar_{p,q}.

use rayon::prelude::*;

use super::bump::BumpLoss;
use crate::error::{Error, Result};
use crate::rng::SeededStream;

/// A vector field θ ↦ ∇g(θ).
pub trait GradientField: Sync {
    fn dim(&self) -> usize;
    fn gradient(&self, theta: &[f64], out: &mut [f64]);
}

impl GradientField for BumpLoss {
    fn dim(&self) -> usize {
        self.d
    }

    fn gradient(&self, theta: &[f64], out: &mut [f64]) {
        let (_, g) = self.value_and_gradient_slice(theta);
        out.copy_from_slice(&g);
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton iteration on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Quadrature {
    /// Composite tensor Gauss–Legendre: `panels` equal panels per axis, `order`
    /// nodes per panel.
    GaussLegendre { panels: usize, order: usize },
    MonteCarlo { nodes: usize, seed: u64 },
}

impl Quadrature {
    /// Tensor Gauss–Legendre with about 2·10⁶ nodes for d ≤ 3, Monte Carlo
    /// with 10⁵ nodes otherwise.
    pub fn default_for(d: usize) -> Self {
        if d <= 3 {
            let per_axis = (2.0e6f64).powf(1.0 / d as f64).min(4096.0);
            let panels = ((per_axis / 8.0).floor() as usize).max(2);
            Quadrature::GaussLegendre { panels, order: 8 }
        } else {
            Quadrature::MonteCarlo {
                nodes: 100_000,
                seed: 0,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormOptions {
    /// p ∈ [1, ∞].
    pub p: f64,
    pub half_width: f64,
    pub quadrature: Quadrature,
}

impl NormOptions {
    pub fn new(p: f64, d: usize) -> Self {
        NormOptions {
            p,
            half_width: 1.0,
            quadrature: Quadrature::default_for(d),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub error_estimate: f64,
}

/// Integrates (or maximizes, p = ∞) φ(θ) = ‖h(θ)‖₂^p on the box.
fn box_integral(
    d: usize,
    opts: &NormOptions,
    panels: usize,
    order: usize,
    h: &(dyn Fn(&[f64], &mut [f64]) + Sync),
) -> f64 {
    let (gx, gw) = gauss_legendre(order);
    let w = opts.half_width;
    let pw = 2.0 * w / panels as f64;
    let n = panels * order;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 0..panels {
        let c = -w + pw * (k as f64 + 0.5);
        for (x, wt) in gx.iter().zip(&gw) {
            nodes.push(c + 0.5 * pw * x);
            weights.push(0.5 * pw * wt);
        }
    }
    let sup = opts.p.is_infinite();
    let rest = n.pow(d as u32 - 1);
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i0| {
            let mut theta = vec![0.0; d];
            let mut out = vec![0.0; d];
            let mut acc = 0.0f64;
            for idx in 0..rest {
                theta[0] = nodes[i0];
                let mut wt = weights[i0];
                let mut k = idx;
                for x in theta.iter_mut().skip(1) {
                    *x = nodes[k % n];
                    wt *= weights[k % n];
                    k /= n;
                }
                h(&theta, &mut out);
                let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                if sup {
                    acc = acc.max(norm);
                } else if norm > 0.0 {
                    acc += wt * norm.powf(opts.p);
                }
            }
            acc
        })
        .collect();
    if sup {
        partial.into_iter().fold(0.0, f64::max)
    } else {
        partial.into_iter().sum()
    }
}

/// ‖h‖_{L^p(box)} for a vector field h given as a closure.
pub fn lp_norm(
    d: usize,
    opts: &NormOptions,
    h: &(dyn Fn(&[f64], &mut [f64]) + Sync),
) -> Result<NormEstimate> {
    if !(opts.p >= 1.0) {
        return Err(Error::param("p must be >= 1"));
    }
    if !(opts.half_width > 0.0) {
        return Err(Error::param("box half-width must be positive"));
    }
    match &opts.quadrature {
        Quadrature::GaussLegendre { panels, order } => {
            if d > 3 {
                return Err(Error::Unsupported(
                    "tensor Gauss-Legendre is limited to d <= 3".into(),
                ));
            }
            let (panels, order) = (*panels, *order);
            if panels < 2 || order == 0 {
                return Err(Error::param("need >= 2 panels and order >= 1"));
            }
            let root = |v: f64| if opts.p.is_infinite() { v } else { v.powf(1.0 / opts.p) };
            let fine = root(box_integral(d, opts, panels, order, h));
            let coarse = root(box_integral(d, opts, panels / 2, order, h));
            Ok(NormEstimate {
                value: fine,
                error_estimate: (fine - coarse).abs(),
            })
        }
        Quadrature::MonteCarlo { nodes, seed } => {
            if *nodes < 2 {
                return Err(Error::param("need at least 2 Monte Carlo nodes"));
            }
            let w = opts.half_width;
            let volume = (2.0 * w).powi(d as i32);
            let chunk = 4096;
            let n_chunks = nodes.div_ceil(chunk);
            let stats: Vec<(f64, f64, f64)> = (0..n_chunks)
                .into_par_iter()
                .map(|c| {
                    let mut s = SeededStream::new(*seed, c as u64);
                    let mut theta = vec![0.0; d];
                    let mut out = vec![0.0; d];
                    let (mut sum, mut sum2, mut mx) = (0.0, 0.0, 0.0f64);
                    let count = chunk.min(nodes - c * chunk);
                    for _ in 0..count {
                        theta.iter_mut().for_each(|x| *x = -w + 2.0 * w * s.uniform());
                        h(&theta, &mut out);
                        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                        mx = mx.max(norm);
                        if opts.p.is_finite() {
                            let v = norm.powf(opts.p);
                            sum += v;
                            sum2 += v * v;
                        }
                    }
                    (sum, sum2, mx)
                })
                .collect();
            let n = *nodes as f64;
            if opts.p.is_infinite() {
                let mx = stats.iter().map(|s| s.2).fold(0.0, f64::max);
                return Ok(NormEstimate {
                    value: mx,
                    error_estimate: f64::NAN,
                });
            }
            let sum: f64 = stats.iter().map(|s| s.0).sum();
            let sum2: f64 = stats.iter().map(|s| s.1).sum();
            let mean = sum / n;
            let var = (sum2 / n - mean * mean).max(0.0);
            let integral = volume * mean;
            let se = volume * (var / n).sqrt();
            let value = integral.powf(1.0 / opts.p);
            let error_estimate = if integral > 0.0 {
                value / opts.p * se / integral
            } else {
                0.0
            };
            Ok(NormEstimate {
                value,
                error_estimate,
            })
        }
    }
}

/// ‖∇f − ∇g‖_{L^p(box)}.
pub fn gradient_distance(
    f: &dyn GradientField,
    g: &dyn GradientField,
    opts: &NormOptions,
) -> Result<NormEstimate> {
    if f.dim() != g.dim() {
        return Err(Error::Dimension {
            expected: f.dim(),
            got: g.dim(),
        });
    }
    let d = f.dim();
    let diff = |theta: &[f64], out: &mut [f64]| {
        let mut tmp = vec![0.0; d];
        f.gradient(theta, out);
        g.gradient(theta, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o -= t;
        }
    };
    lp_norm(d, opts, &diff)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GvarOptions {
    pub norm: NormOptions,
    /// q ∈ [1, ∞].
    pub q: f64,
    /// Divide the q-sum by the sequence length T before the 1/q root.
    pub normalized: bool,
}

fn combine(terms: &[f64], q: f64, normalized: bool, len: usize) -> f64 {
    if q.is_infinite() {
        return terms.iter().cloned().fold(0.0, f64::max);
    }
    let mut s: f64 = terms.iter().map(|x| x.powf(q)).sum();
    if normalized {
        s /= len as f64;
    }
    s.powf(1.0 / q)
}

/// GVar_{p,q} of g_1..g_T: the q-aggregate of ‖∇g_{t+1} − ∇g_t‖_p. Repeated
/// references to the same field contribute zero without quadrature.
pub fn gvar(seq: &[&dyn GradientField], opts: &GvarOptions) -> Result<NormEstimate> {
    if !(opts.q >= 1.0) {
        return Err(Error::param("q must be >= 1"));
    }
    if seq.is_empty() {
        return Err(Error::param("empty loss sequence"));
    }
    let mut terms = Vec::with_capacity(seq.len());
    let mut errs = Vec::with_capacity(seq.len());
    for w in seq.windows(2) {
        if std::ptr::addr_eq(w[0] as *const dyn GradientField, w[1] as *const dyn GradientField) {
            terms.push(0.0);
            errs.push(0.0);
        } else {
            let est = gradient_distance(w[1], w[0], &opts.norm)?;
            terms.push(est.value);
            errs.push(est.error_estimate);
        }
    }
    let value = combine(&terms, opts.q, opts.normalized, seq.len());
    let upper: Vec<f64> = terms.iter().zip(&errs).map(|(t, e)| t + e).collect();
    let error_estimate = (combine(&upper, opts.q, opts.normalized, seq.len()) - value).abs();
    Ok(NormEstimate {
        value,
        error_estimate,
    })
}

/// GVar of a block sequence with `switches` sign changes, given the single
/// switch norm s = ‖∇g₊ − ∇g₋‖_p: (switches·s^q)^{1/q}, or s for q = ∞.
pub fn block_gvar(single_switch: f64, switches: usize, q: f64, normalized: bool, len: usize) -> f64 {
    let terms = vec![single_switch; switches];
    combine(&terms, q, normalized, len)
}

/// Closed-form upper bound 2μa(1 + max|ψ'|)·(vol B_d · r^d)^{1/p} on the
/// single-switch norm (valid when B(0, r) ⊂ box; for p = ∞ the volume factor is 1).
pub fn single_switch_upper(loss: &BumpLoss, p: f64) -> f64 {
    let amp = 2.0 * loss.mu * loss.a * (1.0 + super::bump::max_dpsi());
    if p.is_infinite() {
        return amp;
    }
    let d = loss.d as f64;
    let unit_ball = std::f64::consts::PI.powf(d / 2.0) / gamma_fn(d / 2.0 + 1.0);
    amp * (unit_ball * loss.r.powf(d)).powf(1.0 / p)
}

fn gamma_fn(x: f64) -> f64 {
    // Only needed at integers and half-integers.
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as u64).map(|k| k as f64).product()
    } else {
        let mut v = std::f64::consts::PI.sqrt();
        let mut k = 0.5;
        while k < x - 1e-12 {
            v *= k;
            k += 1.0;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((i8 - 2.0 / 9.0).abs() < 1e-14);
        let odd: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert!(odd.abs() < 1e-15);
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_fn(3.0), 2.0);
        assert!((gamma_fn(1.5) - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!((gamma_fn(2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_field_norm() {
        let opts = NormOptions {
            p: 2.0,
            half_width: 1.0,
            quadrature: Quadrature::GaussLegendre { panels: 4, order: 4 },
        };
        let h = |_: &[f64], out: &mut [f64]| out.iter_mut().for_each(|o| *o = 1.0);
        // ∫_{[-1,1]^2} ‖(1,1)‖² = 4·2 = 8
        let est = lp_norm(2, &opts, &h).unwrap();
        assert!((est.value - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_agrees_with_tensor_rule() {
        let h = |t: &[f64], out: &mut [f64]| out.copy_from_slice(t);
        let gl = NormOptions {
            p: 2.0,
            half_width: 1.0,
            quadrature: Quadrature::GaussLegendre { panels: 2, order: 4 },
        };
        let mc = NormOptions {
            quadrature: Quadrature::MonteCarlo {
                nodes: 200_000,
                seed: 3,
            },
            ..gl.clone()
        };
        let a = lp_norm(2, &gl, &h).unwrap();
        let b = lp_norm(2, &mc, &h).unwrap();
        // ∫ (x²+y²) over [-1,1]² = 8/3
        assert!((a.value - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((a.value - b.value).abs() < 5.0 * b.error_estimate + 1e-3);
    }

    #[test]
    fn constant_sequence_has_zero_variation() {
        let b = BumpLoss::localized(1.0, 0.05, 0.2, 1.0, 2).unwrap();
        let seq: Vec<&dyn GradientField> = vec![&b, &b, &b];
        let opts = GvarOptions {
            norm: NormOptions::new(2.0, 2),
            q: 1.0,
            normalized: false,
        };
        assert_eq!(gvar(&seq, &opts).unwrap().value, 0.0);
    }

    #[test]
    fn single_switch_equals_gradient_distance() {
        let p = BumpLoss::localized(1.0, 0.05, 0.2, 1.0, 2).unwrap();
        let m = p.with_sign(-1.0);
        let norm = NormOptions {
            p: 2.0,
            half_width: 1.0,
            quadrature: Quadrature::GaussLegendre { panels: 64, order: 8 },
        };
        let seq: Vec<&dyn GradientField> = vec![&p, &m];
        let opts = GvarOptions {
            norm: norm.clone(),
            q: 1.0,
            normalized: false,
        };
        let g = gvar(&seq, &opts).unwrap().value;
        let direct = gradient_distance(&p, &m, &norm).unwrap().value;
        assert_eq!(g, direct);
        assert!(direct <= single_switch_upper(&p, 2.0));
        assert!(direct > 0.0);
    }

    #[test]
    fn normalization_divides_by_length() {
        assert!((block_gvar(2.0, 3, 2.0, false, 10) - (12f64).sqrt()).abs() < 1e-15);
        assert!((block_gvar(2.0, 3, 2.0, true, 12) - 1.0).abs() < 1e-15);
        assert_eq!(block_gvar(2.0, 3, f64::INFINITY, false, 10), 2.0);
    }
}
