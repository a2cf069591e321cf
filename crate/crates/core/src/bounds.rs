//! Closed-form error floors, step-size caps, schedules, the Γ stability
//! matrix, drift functionals, Heavy-Ball stationary variance and response
//! times.
//!
//! The drift functionals are shape-only: the high-probability bounds they
//! enter carry unspecified absolute constants, which are not reported.

use serde::{Deserialize, Serialize};

use crate::drift::MinimizerPath;
use crate::error::{Error, Result};
use crate::optim::{Schedule, ScheduleKind};
use crate::problems::{ProblemSpec, Task};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma: f64,
    #[serde(rename = "Delta")]
    pub delta: f64,
    pub d: usize,
}

impl RegimeParams {
    pub fn new(mu: f64, l: f64, beta: f64, gamma: f64, sigma: f64, delta: f64) -> Result<Self> {
        let p = RegimeParams {
            mu,
            l,
            beta,
            gamma,
            sigma,
            delta,
            d: 1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn kappa(&self) -> f64 {
        self.l / self.mu
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::param("mu must be positive"));
        }
        if !(self.l >= self.mu && self.l.is_finite()) {
            return Err(Error::param("L must be finite and >= mu"));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::param("beta must lie in [0, 1)"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::param("gamma must be >= 0"));
        }
        if !(self.sigma >= 0.0 && self.delta >= 0.0) {
            return Err(Error::param("sigma and Delta must be >= 0"));
        }
        if self.d == 0 {
            return Err(Error::param("dimension must be >= 1"));
        }
        Ok(())
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        RegimeParams { gamma, ..*self }
    }
}

/// Where the floor-optimal step size landed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimum {
    Interior,
    /// The unconstrained optimum exceeds the cap; γ* is the cap.
    Boundary,
    /// Δ = 0: the floor tends to 0 as γ → 0, reported as γ* = 0.
    NoDrift,
    /// σ = Δ = 0: the floor is 0 for every γ; γ* is the cap.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorOptimum {
    pub floor: f64,
    pub gamma_star: f64,
    pub optimum: Optimum,
}

/// min{μ/L², 1/L}, the step-size range of the expectation bound.
pub fn cap_sgd(p: &RegimeParams) -> f64 {
    (p.mu / (p.l * p.l)).min(1.0 / p.l)
}

/// 1/(2L), the first step size of the SGD step-decay schedule and the cap for γ*.
pub fn sgd_gamma_cap(p: &RegimeParams) -> f64 {
    0.5 / p.l
}

/// μ(1−β)²/(4L²).
pub fn cap_mom(p: &RegimeParams) -> f64 {
    p.mu * (1.0 - p.beta).powi(2) / (4.0 * p.l * p.l)
}

/// E(γ) = σ²γ/μ + 4Δ²/(μ²γ²).
pub fn sgd_floor(p: &RegimeParams, gamma: f64) -> f64 {
    let (s2, d2, mu) = (p.sigma * p.sigma, p.delta * p.delta, p.mu);
    let drift = if d2 == 0.0 { 0.0 } else { 4.0 * d2 / (mu * mu * gamma * gamma) };
    s2 * gamma / mu + drift
}

/// The (A, B) of E_β(γ) = A/γ² + Bγ.
pub fn momentum_floor_coefficients(p: &RegimeParams) -> (f64, f64) {
    let b = p.beta;
    let a = 192.0 * (2.0 + b).powi(2) * p.delta * p.delta / (p.mu * p.mu);
    let bb = 96.0 * p.sigma * p.sigma / (p.mu * (1.0 - b));
    (a, bb)
}

/// E_β(γ) = 192(2+β)²Δ²/(μ²γ²) + 96σ²γ/(μ(1−β)).
pub fn momentum_floor(p: &RegimeParams, gamma: f64) -> f64 {
    let (a, b) = momentum_floor_coefficients(p);
    let drift = if a == 0.0 { 0.0 } else { a / (gamma * gamma) };
    drift + b * gamma
}

fn floor_optimum(a: f64, b: f64, cap: f64, f: impl Fn(f64) -> f64) -> FloorOptimum {
    match (a > 0.0, b > 0.0) {
        (false, false) => FloorOptimum {
            floor: 0.0,
            gamma_star: cap,
            optimum: Optimum::Degenerate,
        },
        (false, true) => FloorOptimum {
            floor: 0.0,
            gamma_star: 0.0,
            optimum: Optimum::NoDrift,
        },
        (true, false) => FloorOptimum {
            floor: f(cap),
            gamma_star: cap,
            optimum: Optimum::Boundary,
        },
        (true, true) => {
            let g = (2.0 * a / b).cbrt();
            if g < cap {
                FloorOptimum {
                    floor: f(g),
                    gamma_star: g,
                    optimum: Optimum::Interior,
                }
            } else {
                FloorOptimum {
                    floor: f(cap),
                    gamma_star: cap,
                    optimum: Optimum::Boundary,
                }
            }
        }
    }
}

/// Minimizer of E(γ) over (0, 1/(2L)]. The interior optimum is
/// γ* = (8Δ²/(μσ²))^{1/3} with E = 3(Δσ²/μ²)^{2/3}.
pub fn sgd_floor_and_gamma(p: &RegimeParams) -> Result<FloorOptimum> {
    p.validate()?;
    let a = 4.0 * p.delta * p.delta / (p.mu * p.mu);
    let b = p.sigma * p.sigma / p.mu;
    let mut out = floor_optimum(a, b, sgd_gamma_cap(p), |g| sgd_floor(p, g));
    if out.optimum == Optimum::Interior {
        out.floor = 3.0 * (p.delta * p.sigma * p.sigma / (p.mu * p.mu)).powf(2.0 / 3.0);
    }
    Ok(out)
}

/// Minimizer of E_β(γ) over (0, μ(1−β)²/(4L²)].
pub fn momentum_floor_and_gamma(p: &RegimeParams) -> Result<FloorOptimum> {
    p.validate()?;
    let (a, b) = momentum_floor_coefficients(p);
    Ok(floor_optimum(a, b, cap_mom(p), |g| momentum_floor(p, g)))
}

/// The 2×2 nonnegative matrix Γ of the coupled error/velocity recursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub beta_prime: f64,
    pub spectral_radius: f64,
    /// max{1 − γμ/(2(1−β)), β + 2γL²/(μ(1−β))}.
    pub column_sum_bound: f64,
}

/// a = 1 − γμ/(1−β), b = γβ′²L²/(μ(1−β)), c = 2γ²L²/(1−β)³,
/// d = β + 2γ²β′²L²/(1−β)³ with β′ = ββ₁ + β₂.
pub fn stability_matrix_gamma(p: &RegimeParams, beta1: f64, beta2: f64) -> Result<GammaMatrix> {
    p.validate()?;
    if beta1 * beta2 != 0.0 || (beta1 + beta2 - p.beta).abs() > 1e-12 || beta1 < 0.0 || beta2 < 0.0 {
        return Err(Error::param("need beta1*beta2 = 0 and beta1 + beta2 = beta"));
    }
    let (mu, l, b, g) = (p.mu, p.l, p.beta, p.gamma);
    let bp = b * beta1 + beta2;
    let om = 1.0 - b;
    let a = 1.0 - g * mu / om;
    let bb = g * bp * bp * l * l / (mu * om);
    let c = 2.0 * g * g * l * l / om.powi(3);
    let d = b + 2.0 * g * g * bp * bp * l * l / om.powi(3);
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * bb * c).sqrt();
    let spectral_radius = ((tr + disc) / 2.0).abs().max(((tr - disc) / 2.0).abs());
    Ok(GammaMatrix {
        a,
        b: bb,
        c,
        d,
        beta_prime: bp,
        spectral_radius,
        column_sum_bound: (1.0 - g * mu / (2.0 * om)).max(b + 2.0 * g * l * l / (mu * om)),
    })
}

/// ρ = 1 − γμ/(2(1−β)).
pub fn rho(p: &RegimeParams) -> f64 {
    1.0 - p.gamma * p.mu / (2.0 * (1.0 - p.beta))
}

/// ρ̃ = 1 − γ²μ²/(4(1−β)²).
pub fn rho_tilde(p: &RegimeParams) -> f64 {
    let eta = p.gamma / (1.0 - p.beta);
    1.0 - eta * eta * p.mu * p.mu / 4.0
}

/// Per-step contraction factors of the two momentum analyses:
/// exp(−γμ/(1−β)) for the expectation bound and exp(−γ²μ²/(4(1−β)²)) for the
/// high-probability bound. Neither is substituted for the other.
pub fn contraction_constants(p: &RegimeParams) -> (f64, f64) {
    let eta = p.gamma / (1.0 - p.beta);
    ((-eta * p.mu).exp(), (-eta * eta * p.mu * p.mu / 4.0).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpectationBound {
    pub sgd: f64,
    pub mom: f64,
    /// γ ≤ min{μ/L², 1/L}.
    pub sgd_valid: bool,
    /// γ ≤ μ(1−β)²/(4L²).
    pub mom_valid: bool,
}

/// Right-hand sides of the expectation bounds on E‖θ_{t+1} − θ*_{t+1}‖².
pub fn expectation_bound_rhs(p: &RegimeParams, e0_sq: f64, t: usize) -> Result<ExpectationBound> {
    p.validate()?;
    if !(p.gamma > 0.0) {
        return Err(Error::param("gamma must be positive"));
    }
    let (g, mu, b) = (p.gamma, p.mu, p.beta);
    let n = (t + 1) as f64;
    let sgd = (1.0 - g * mu / 2.0).powf(n) * e0_sq + sgd_floor(p, g);
    let mom = 48.0 / (1.0 - b).powi(2) * (-g * mu * n / (1.0 - b)).exp() * e0_sq + momentum_floor(p, g);
    Ok(ExpectationBound {
        sgd,
        mom,
        sgd_valid: g <= cap_sgd(p),
        mom_valid: g <= cap_mom(p),
    })
}

/// Step-decay SGD: γ₀ = 1/(2L), T₀ = ⌈2/(μγ₀)·ln(2e₀/E(γ₀))⌉,
/// T_k = ⌈2 ln 4/(μγ_k)⌉.
pub fn sgd_step_decay_schedule(p: &RegimeParams, e0_sq: f64) -> Result<Schedule> {
    let opt = sgd_floor_and_gamma(p)?;
    if opt.gamma_star <= 0.0 {
        return Err(Error::param("no drift: the optimal step size is 0"));
    }
    let mu = p.mu;
    let g0 = sgd_gamma_cap(p);
    let t0 = 2.0 / (mu * g0) * (2.0 * e0_sq / sgd_floor(p, g0)).ln();
    Schedule::step_decay(ScheduleKind::StepDecaySgd, g0, opt.gamma_star, t0, |g| {
        2.0 * 4f64.ln() / (mu * g)
    })
}

/// Step-decay momentum with restart: γ₀ = μ(1−β)²/(4L²),
/// T₀ = ⌈(1−β)/(μγ₀)·ln(2e₀/((1−β)²E_β(γ₀)))⌉, T_k = ⌈(1−β) ln 4/(μγ_k)⌉.
pub fn momentum_step_decay_schedule(p: &RegimeParams, e0_sq: f64) -> Result<Schedule> {
    let opt = momentum_floor_and_gamma(p)?;
    if opt.gamma_star <= 0.0 {
        return Err(Error::param("no drift: the optimal step size is 0"));
    }
    let (mu, om) = (p.mu, 1.0 - p.beta);
    let g0 = cap_mom(p);
    let t0 = om / (mu * g0) * (2.0 * e0_sq / (om * om * momentum_floor(p, g0))).ln();
    Schedule::step_decay(ScheduleKind::StepDecayMomentum, g0, opt.gamma_star, t0, |g| {
        om * 4f64.ln() / (mu * g)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BurnIn {
    pub t_sgd: f64,
    pub t_mom: f64,
    pub schedule_sgd: Option<Schedule>,
    pub schedule_mom: Option<Schedule>,
}

/// Constant-rate burn-ins (1/(μγ*))·ln(e₀/E) and
/// (1−β)/(μγ*_β)·ln(e₀/((1−β)²E_β)), floored at 0, and both step-decay
/// schedules. Without drift the burn-ins are infinite and no schedule exists.
pub fn burn_in_times(p: &RegimeParams, e0_sq: f64) -> Result<BurnIn> {
    let s = sgd_floor_and_gamma(p)?;
    let m = momentum_floor_and_gamma(p)?;
    let om = 1.0 - p.beta;
    let burn = |rate: f64, ratio: f64| {
        if rate <= 0.0 || !(ratio > 0.0) {
            f64::INFINITY
        } else {
            (ratio.ln() / rate).max(0.0)
        }
    };
    let t_sgd = match s.optimum {
        Optimum::Degenerate => 0.0,
        _ => burn(p.mu * s.gamma_star, e0_sq / s.floor),
    };
    let t_mom = match m.optimum {
        Optimum::Degenerate => 0.0,
        _ => burn(p.mu * m.gamma_star / om, e0_sq / (om * om * m.floor)),
    };
    Ok(BurnIn {
        t_sgd,
        t_mom,
        schedule_sgd: sgd_step_decay_schedule(p, e0_sq).ok(),
        schedule_mom: momentum_step_decay_schedule(p, e0_sq).ok(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub floor_sgd: f64,
    pub gamma_star_sgd: f64,
    pub optimum_sgd: Optimum,
    pub floor_mom: f64,
    pub gamma_star_mom: f64,
    pub optimum_mom: Optimum,
    pub cap_sgd: f64,
    pub cap_mom: f64,
    pub gamma_within_cap_mom: bool,
    pub burn_in_sgd: f64,
    pub burn_in_mom: f64,
    pub rho: f64,
    pub rho_tilde: f64,
    pub spectral_radius_gamma: f64,
}

/// Every closed-form quantity at the given parameters. Γ is evaluated for
/// Heavy-Ball at the given γ; burn-ins use initial error `e0_sq`.
pub fn bound_report(p: &RegimeParams, e0_sq: f64) -> Result<BoundReport> {
    let s = sgd_floor_and_gamma(p)?;
    let m = momentum_floor_and_gamma(p)?;
    let burn = burn_in_times(p, e0_sq)?;
    let gm = stability_matrix_gamma(p, 0.0, p.beta)?;
    Ok(BoundReport {
        floor_sgd: s.floor,
        gamma_star_sgd: s.gamma_star,
        optimum_sgd: s.optimum,
        floor_mom: m.floor,
        gamma_star_mom: m.gamma_star,
        optimum_mom: m.optimum,
        cap_sgd: cap_sgd(p),
        cap_mom: cap_mom(p),
        gamma_within_cap_mom: p.gamma <= cap_mom(p),
        burn_in_sgd: burn.t_sgd,
        burn_in_mom: burn.t_mom,
        rho: rho(p),
        rho_tilde: rho_tilde(p),
        spectral_radius_gamma: gm.spectral_radius,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftFunctionals {
    pub d_t: f64,
    pub d2_t: f64,
    pub dmom_t: f64,
    pub dmom2_t: f64,
}

/// Σ_ℓ w^{T−ℓ−1} x_ℓ by Horner's rule.
fn discounted(xs: &[f64], w: f64) -> f64 {
    xs.iter().fold(0.0, |acc, &x| acc * w + x)
}

/// 𝔇_T, 𝔇_T^(2) over ‖Δ_ℓ‖² with rate 1 − γμ/2, and the momentum variants over
/// ‖b_ℓ‖² with rate ρ̃. Without forcing terms the momentum variants use the
/// increments themselves.
pub fn drift_functionals(increments: &[f64], forcing: Option<&[f64]>, p: &RegimeParams) -> Result<DriftFunctionals> {
    p.validate()?;
    let b = forcing.unwrap_or(increments);
    if b.len() != increments.len() {
        return Err(Error::Dimension {
            expected: increments.len(),
            got: b.len(),
        });
    }
    let w = 1.0 - p.gamma * p.mu / 2.0;
    let rt = rho_tilde(p);
    Ok(DriftFunctionals {
        d_t: discounted(increments, w),
        d2_t: discounted(increments, w * w),
        dmom_t: discounted(b, rt),
        dmom2_t: discounted(b, rt * rt),
    })
}

/// ‖b_ℓ‖² for ℓ = 0..T−1 with b_ℓ = −(I − γH)Δ_{ℓ−1} − KΔ_{ℓ−2},
/// K = −βI + γβ₁H, H = diag(hessian) and Δ_{−1} = Δ_{−2} = 0.
pub fn forcing_vectors(path: &MinimizerPath, p: &RegimeParams, beta1: f64, hessian: &[f64]) -> Result<Vec<f64>> {
    p.validate()?;
    let d = path.dim();
    if hessian.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: hessian.len(),
        });
    }
    let t_len = path.horizon();
    let pts = &path.points;
    let delta = |l: usize, i: usize| pts[l][i] - pts[l + 1][i];
    let (g, b) = (p.gamma, p.beta);
    let mut out = Vec::with_capacity(t_len);
    for l in 0..t_len {
        let mut n2 = 0.0;
        for (i, &h) in hessian.iter().enumerate().take(d) {
            let mut v = 0.0;
            if l >= 1 {
                v -= (1.0 - g * h) * delta(l - 1, i);
            }
            if l >= 2 {
                v -= (-b + g * beta1 * h) * delta(l - 2, i);
            }
            n2 += v * v;
        }
        out.push(n2);
    }
    Ok(out)
}

/// [`forcing_vectors`] for a problem with a constant Hessian.
pub fn forcing_vectors_for(spec: &ProblemSpec, path: &MinimizerPath, p: &RegimeParams, beta1: f64) -> Result<Vec<f64>> {
    match spec.task {
        Task::Quadratic => forcing_vectors(path, p, beta1, &spec.hessian_diag),
        Task::Linreg => forcing_vectors(path, p, beta1, &spec.covariance_eigs),
        _ => Err(Error::Unsupported(
            "forcing vectors need a constant Hessian (quadratic or linreg)".into(),
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HbVariance {
    /// Stationary Var(θ_t).
    pub v: f64,
    /// Stationary Cov(θ_t, θ_{t−1}).
    pub lag_cov: f64,
    /// γσ²/(4μ(1−β)).
    pub lower_bound: f64,
    /// Whether v ≥ lower_bound; `None` when γμ > 1 + β.
    pub lower_bound_holds: Option<bool>,
}

impl HbVariance {
    /// Σ∞ for the state (θ_t, θ_{t−1}).
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        [[self.v, self.lag_cov], [self.lag_cov, self.v]]
    }
}

/// Largest root modulus of λ² − (1+β−γμ)λ + β.
pub fn companion_spectral_radius(mu: f64, gamma: f64, beta: f64) -> f64 {
    let tr = 1.0 + beta - gamma * mu;
    let disc = tr * tr - 4.0 * beta;
    if disc < 0.0 {
        beta.sqrt()
    } else {
        let s = disc.sqrt();
        ((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs())
    }
}

/// v = (1+β)γσ²/((1−β)μ(2(1+β)−γμ)) for x_{t+1} = (1+β−γμ)x_t − βx_{t−1} − γξ_t.
pub fn hb_stationary_variance(mu: f64, gamma: f64, beta: f64, sigma2: f64) -> Result<HbVariance> {
    if !(mu > 0.0 && gamma > 0.0 && (0.0..1.0).contains(&beta) && sigma2 >= 0.0) {
        return Err(Error::param("need mu, gamma > 0, beta in [0,1), sigma2 >= 0"));
    }
    let gm = gamma * mu;
    if gm >= 2.0 * (1.0 + beta) || companion_spectral_radius(mu, gamma, beta) >= 1.0 {
        return Err(Error::Stability(format!(
            "companion matrix unstable at gamma*mu = {gm}, beta = {beta}"
        )));
    }
    let v = (1.0 + beta) * gamma * sigma2 / ((1.0 - beta) * mu * (2.0 * (1.0 + beta) - gm));
    let lower_bound = gamma * sigma2 / (4.0 * mu * (1.0 - beta));
    Ok(HbVariance {
        v,
        lag_cov: (1.0 + beta - gm) * v / (1.0 + beta),
        lower_bound,
        lower_bound_holds: (gm <= 1.0 + beta).then_some(v >= lower_bound),
    })
}

/// Largest entry of |Σ − AΣAᵀ − σ²BBᵀ| with A = [[1+β−γμ, −β], [1, 0]] and
/// B = (−γ, 0).
pub fn lyapunov_residual(mu: f64, gamma: f64, beta: f64, sigma2: f64, s: &[[f64; 2]; 2]) -> f64 {
    let a = [[1.0 + beta - gamma * mu, -beta], [1.0, 0.0]];
    let mut as_ = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            as_[i][j] = a[i][0] * s[0][j] + a[i][1] * s[1][j];
        }
    }
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let asat = as_[i][0] * a[j][0] + as_[i][1] * a[j][1];
            let q = if i == 0 && j == 0 { sigma2 * gamma * gamma } else { 0.0 };
            worst = worst.max((s[i][j] - asat - q).abs());
        }
    }
    worst
}

pub const RESPONSE_C: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResponseTime {
    pub tau: f64,
    /// (1−β)·ln 2/(cγμ).
    pub proxy: f64,
}

/// τ_β = min{t : (1 − cγμ/(1−β))^t ≤ 1/2} with c = 2.
pub fn response_time(mu: f64, gamma: f64, beta: f64) -> Result<ResponseTime> {
    response_time_with(mu, gamma, beta, RESPONSE_C)
}

/// τ_β for a given c, valid when 0 < γμ ≤ min{(1−√β)², (1−β)/4}.
pub fn response_time_with(mu: f64, gamma: f64, beta: f64, c: f64) -> Result<ResponseTime> {
    let gm = gamma * mu;
    if !(0.0..1.0).contains(&beta) || !(c > 0.0) {
        return Err(Error::param("need beta in [0,1) and c > 0"));
    }
    let limit = (1.0 - beta.sqrt()).powi(2).min((1.0 - beta) / 4.0);
    if !(gm > 0.0 && gm <= limit * (1.0 + 1e-12)) {
        return Err(Error::Regime(format!(
            "gamma*mu = {gm} outside (0, {limit}]"
        )));
    }
    let q = 1.0 - c * gm / (1.0 - beta);
    let mut tau = if q <= 0.0 { 1.0 } else { (0.5f64.ln() / q.ln()).ceil().max(1.0) };
    // Guard the ceiling against rounding in the logarithms.
    while tau > 1.0 && q.powf(tau - 1.0) <= 0.5 {
        tau -= 1.0;
    }
    while q.powf(tau) > 0.5 {
        tau += 1.0;
    }
    Ok(ResponseTime {
        tau,
        proxy: (1.0 - beta) * 2f64.ln() / (c * gm),
    })
}

/// Golden-section search for the minimum of a unimodal function on [lo, hi].
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    let (xb, fb) = [(x1, f1), (x2, f2), (x, fx)]
        .into_iter()
        .fold((x, fx), |best, c| if c.1 < best.1 { c } else { best });
    (xb, fb)
}
