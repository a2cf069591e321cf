//! Localized bump losses g_u(θ) = (μ/2)‖θ‖² − u·μ·a·⟨θ, e₁⟩·ψ_r(θ).
//!
//! ψ is the radial quintic smoothstep: 1 for s ≤ 1/2, 0 for s ≥ 1 and
//! 1 − S(2s − 1) in between, S(w) = 6w⁵ − 15w⁴ + 10w³. ψ_r(θ) = ψ(‖θ‖/r).

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::vector::Vector;

pub fn psi(s: f64) -> f64 {
    if s <= 0.5 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let w = 2.0 * s - 1.0;
        1.0 - w * w * w * (10.0 + w * (-15.0 + 6.0 * w))
    }
}

/// dψ/ds.
pub fn dpsi(s: f64) -> f64 {
    if s <= 0.5 || s >= 1.0 {
        0.0
    } else {
        let w = 2.0 * s - 1.0;
        -2.0 * 30.0 * w * w * (1.0 - w) * (1.0 - w)
    }
}

/// d²ψ/ds².
pub fn d2psi(s: f64) -> f64 {
    if s <= 0.5 || s >= 1.0 {
        0.0
    } else {
        let w = 2.0 * s - 1.0;
        -4.0 * 60.0 * w * (1.0 - w) * (1.0 - 2.0 * w)
    }
}

const RADIAL_GRID: usize = 200_000;

fn radial_max(f: impl Fn(f64) -> f64) -> f64 {
    (0..=RADIAL_GRID)
        .map(|i| f(0.5 + 0.5 * i as f64 / RADIAL_GRID as f64))
        .fold(0.0, f64::max)
}

/// max over the radial grid of ‖∇ψ‖ and ‖∇²ψ‖_op, whose eigenvalues are ψ''(s)
/// radially and ψ'(s)/s tangentially.
pub fn c_psi() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let grad = radial_max(|s| dpsi(s).abs());
        let hess = radial_max(|s| d2psi(s).abs().max(dpsi(s).abs() / s));
        grad.max(hess)
    })
}

/// max_s |ψ'(s)|.
pub fn max_dpsi() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| radial_max(|s| dpsi(s).abs()))
}

/// Pointwise localization constant C with ‖∇g₊ − ∇g₋‖² ≤ 4Cμ²a²·1{‖θ‖<r}:
/// C = sup_s (ψ(s) + s|ψ'(s)|)².
pub fn localization_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        (0..=RADIAL_GRID)
            .map(|i| {
                let s = i as f64 / RADIAL_GRID as f64;
                (psi(s) + s * dpsi(s).abs()).powi(2)
            })
            .fold(0.0, f64::max)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BumpLoss {
    pub mu: f64,
    pub a: f64,
    pub r: f64,
    pub u: f64,
    pub d: usize,
    pub c_psi: f64,
}

impl BumpLoss {
    /// Bump loss in the strongly convex regime a/r ≤ 1/(12 C_ψ).
    pub fn new(mu: f64, a: f64, r: f64, u: f64, d: usize) -> Result<Self> {
        let loss = Self::localized(mu, a, r, u, d)?;
        if !loss.is_convex_regime() {
            return Err(Error::param(format!(
                "a/r = {} exceeds 1/(12 C_psi) = {}",
                a / r,
                loss.convexity_ratio()
            )));
        }
        Ok(loss)
    }

    /// Bump loss that only requires a ≤ r/4 (minimizer inside the flat core);
    /// convexity is not guaranteed.
    pub fn localized(mu: f64, a: f64, r: f64, u: f64, d: usize) -> Result<Self> {
        if !(mu > 0.0) || !(a > 0.0) || !(r > 0.0) {
            return Err(Error::param("mu, a and r must be positive"));
        }
        if a > r / 4.0 {
            return Err(Error::param(format!("need a <= r/4, got a={a}, r={r}")));
        }
        if u != 1.0 && u != -1.0 {
            return Err(Error::param("u must be +1 or -1"));
        }
        if d == 0 {
            return Err(Error::param("dimension must be positive"));
        }
        Ok(BumpLoss {
            mu,
            a,
            r,
            u,
            d,
            c_psi: c_psi(),
        })
    }

    pub fn with_sign(&self, u: f64) -> Self {
        BumpLoss { u, ..self.clone() }
    }

    pub fn convexity_ratio(&self) -> f64 {
        1.0 / (12.0 * self.c_psi)
    }

    pub fn is_convex_regime(&self) -> bool {
        self.a / self.r <= self.convexity_ratio()
    }

    /// Bound on ‖∇²g_u − μI‖_op.
    pub fn hessian_deviation_bound(&self) -> f64 {
        3.0 * self.mu * self.a * self.c_psi / self.r
    }

    pub fn smoothness_bound(&self) -> f64 {
        self.mu + self.hessian_deviation_bound()
    }

    pub fn minimizer(&self) -> Vector {
        Vector::basis(self.d, 0).scale(self.u * self.a)
    }

    pub fn min_value(&self) -> f64 {
        -0.5 * self.mu * self.a * self.a
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let n2: f64 = theta.iter().map(|x| x * x).sum();
        let s = n2.sqrt() / self.r;
        0.5 * self.mu * n2 - self.u * self.mu * self.a * theta[0] * psi(s)
    }

    pub fn value_and_gradient_slice(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let n2: f64 = theta.iter().map(|x| x * x).sum();
        let norm = n2.sqrt();
        let s = norm / self.r;
        let ps = psi(s);
        let k = self.u * self.mu * self.a;
        let value = 0.5 * self.mu * n2 - k * theta[0] * ps;
        let mut grad: Vec<f64> = theta.iter().map(|x| self.mu * x).collect();
        grad[0] -= k * ps;
        let dp = dpsi(s);
        if dp != 0.0 {
            let c = k * theta[0] * dp / (self.r * norm);
            for (g, x) in grad.iter_mut().zip(theta) {
                *g -= c * x;
            }
        }
        (value, grad)
    }

    pub fn value_and_gradient(&self, theta: &Vector) -> Result<(f64, Vector)> {
        if theta.dim() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: theta.dim(),
            });
        }
        let (v, g) = self.value_and_gradient_slice(theta.as_slice());
        Ok((v, Vector::from_raw(g)))
    }

    /// ∇g_u(θ) − ∇g_{−u}(θ) = −2uμa(e₁ψ_r + θ₁∇ψ_r).
    pub fn gradient_gap(&self, theta: &[f64], out: &mut [f64]) {
        let n2: f64 = theta.iter().map(|x| x * x).sum();
        let norm = n2.sqrt();
        let s = norm / self.r;
        out.iter_mut().for_each(|o| *o = 0.0);
        if s >= 1.0 {
            return;
        }
        let k = -2.0 * self.u * self.mu * self.a;
        out[0] = k * psi(s);
        let dp = dpsi(s);
        if dp != 0.0 {
            let c = k * theta[0] * dp / (self.r * norm);
            for (o, x) in out.iter_mut().zip(theta) {
                *o += c * x;
            }
        }
    }
}

/// Estimate of the two-point discrepancy χ = inf_θ max{g₊ − g₊*, g₋ − g₋*}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscrepancyEstimate {
    /// Minimum over grid nodes.
    pub chi: f64,
    /// Lipschitz slack covering points between nodes.
    pub tolerance: f64,
    /// chi − tolerance: a certified lower bound on the true infimum.
    pub certified_lower: f64,
    /// μa²/8.
    pub bound: f64,
}

/// Grid search of χ over the box [−2a, 2a]^d (d ≤ 3) with `points_per_axis`
/// nodes per axis. In the convex regime every θ outside the ball of radius 2a
/// already has max gap ≥ μa²/8, so the box suffices for the lower bound.
pub fn discrepancy_lower(
    plus: &BumpLoss,
    minus: &BumpLoss,
    points_per_axis: usize,
) -> Result<DiscrepancyEstimate> {
    if plus.u != 1.0 || minus.u != -1.0 {
        return Err(Error::param("expects the (+, −) pair"));
    }
    if plus.with_sign(-1.0) != *minus {
        return Err(Error::param("losses differ in parameters other than the sign"));
    }
    let d = plus.d;
    if d > 3 {
        return Err(Error::Unsupported("grid discrepancy search needs d <= 3".into()));
    }
    if points_per_axis < 2 {
        return Err(Error::Resolution("need at least 2 points per axis".into()));
    }
    let (mu, a) = (plus.mu, plus.a);
    let w = 2.0 * a;
    let h = 2.0 * w / (points_per_axis - 1) as f64;
    let half_diag = 0.5 * h * (d as f64).sqrt();
    // ‖∇g_u(θ)‖ ≤ μ‖θ‖ + μa(1 + |θ₁|·max|ψ'|/r) on the box.
    let lip = mu * w * (d as f64).sqrt() + mu * a * (1.0 + w * max_dpsi() / plus.r);
    let tolerance = lip * half_diag;
    let bound = mu * a * a / 8.0;
    if tolerance > mu * a * a / 16.0 {
        return Err(Error::Resolution(format!(
            "tolerance {tolerance:.3e} exceeds mu*a^2/16 = {:.3e}; use more points",
            mu * a * a / 16.0
        )));
    }
    let (gp, gm) = (plus.min_value(), minus.min_value());
    let total = points_per_axis.pow(d as u32);
    let mut theta = vec![0.0; d];
    let mut chi = f64::INFINITY;
    for idx in 0..total {
        let mut k = idx;
        for x in theta.iter_mut() {
            *x = -w + h * (k % points_per_axis) as f64;
            k /= points_per_axis;
        }
        let f = (plus.value(&theta) - gp).max(minus.value(&theta) - gm);
        chi = chi.min(f);
    }
    Ok(DiscrepancyEstimate {
        chi,
        tolerance,
        certified_lower: chi - tolerance,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_profile() {
        assert_eq!(psi(0.2), 1.0);
        assert_eq!(psi(0.5), 1.0);
        assert!((psi(0.75) - 0.5).abs() < 1e-15);
        assert_eq!(psi(1.0), 0.0);
        assert_eq!(psi(3.0), 0.0);
    }

    #[test]
    fn psi_derivatives_match_differences() {
        for i in 1..50 {
            let s = 0.5 + i as f64 / 100.0;
            let h = 1e-6;
            let fd1 = (psi(s + h) - psi(s - h)) / (2.0 * h);
            let fd2 = (dpsi(s + h) - dpsi(s - h)) / (2.0 * h);
            assert!((fd1 - dpsi(s)).abs() < 1e-7, "{s}");
            assert!((fd2 - d2psi(s)).abs() < 1e-6, "{s}");
        }
    }

    #[test]
    fn constants_near_closed_form() {
        // max|ψ'| = 2·S'(1/2) = 3.75 and max|ψ''| = 4·max|S''| = 40/√3.
        assert!((max_dpsi() - 3.75).abs() < 1e-9);
        assert!((c_psi() - 40.0 / 3f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn gradient_outside_support_is_mu_theta() {
        let b = BumpLoss::localized(2.0, 0.1, 0.5, 1.0, 3).unwrap();
        let th = [0.4, -0.3, 0.2];
        let (_, g) = b.value_and_gradient_slice(&th);
        for (gi, x) in g.iter().zip(th) {
            assert_eq!(*gi, 2.0 * x);
        }
    }

    #[test]
    fn minimizer_is_stationary() {
        for u in [1.0, -1.0] {
            let b = BumpLoss::localized(1.5, 0.1, 0.4, u, 2).unwrap();
            let (v, g) = b.value_and_gradient(&b.minimizer()).unwrap();
            assert!(g.norm() < 1e-15);
            assert!((v - b.min_value()).abs() < 1e-15);
        }
    }

    #[test]
    fn strict_constructor_enforces_convexity() {
        assert!(BumpLoss::new(1.0, 0.1, 0.4, 1.0, 2).is_err());
        assert!(BumpLoss::new(1.0, 0.1, 30.0, 1.0, 2).is_ok());
        assert!(BumpLoss::localized(1.0, 0.2, 0.4, 1.0, 2).is_err());
    }

    #[test]
    fn gap_matches_gradient_difference() {
        let p = BumpLoss::localized(1.0, 0.1, 0.4, 1.0, 2).unwrap();
        let m = p.with_sign(-1.0);
        let mut gap = vec![0.0; 2];
        for th in [[0.1, 0.05], [0.25, -0.1], [0.0, 0.33], [0.5, 0.5]] {
            let gp = p.value_and_gradient_slice(&th).1;
            let gm = m.value_and_gradient_slice(&th).1;
            p.gradient_gap(&th, &mut gap);
            for i in 0..2 {
                assert!((gp[i] - gm[i] - gap[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn discrepancy_small_example() {
        let p = BumpLoss::new(1.0, 0.1, 30.0, 1.0, 1).unwrap();
        let est = discrepancy_lower(&p, &p.with_sign(-1.0), 2001).unwrap();
        assert!(est.certified_lower >= 0.00125);
        assert!((est.chi - 0.005).abs() < 1e-9);
    }

    #[test]
    fn discrepancy_vanishes_with_a() {
        let p = BumpLoss::new(1.0, 1e-4, 1.0, 1.0, 1).unwrap();
        let est = discrepancy_lower(&p, &p.with_sign(-1.0), 2001).unwrap();
        assert!(est.chi < 1e-8);
    }

    #[test]
    fn coarse_grid_rejected() {
        let p = BumpLoss::new(1.0, 0.1, 30.0, 1.0, 2).unwrap();
        assert!(matches!(
            discrepancy_lower(&p, &p.with_sign(-1.0), 5),
            Err(Error::Resolution(_))
        ));
    }
}
