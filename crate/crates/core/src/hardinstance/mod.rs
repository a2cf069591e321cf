//! Hard instances for momentum under drift: bump losses, block families with
//! packing codewords, pathwise KL, occupation times, Fano bounds and the
//! block-switching inertia experiment.

pub mod bump;
pub mod family;
pub mod gvar;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{hb_stationary_variance, response_time};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SeededStream};
use crate::vector::Vector;

pub use bump::{discrepancy_lower, BumpLoss, DiscrepancyEstimate};
pub use family::{
    build_block_family, constant_weight_packing, BlockEnvironment, BlockFamily, FamilyCheck,
    FamilyOptions, LossSequence, PackingOptions,
};
pub use gvar::{gvar, GradientField, GvarOptions, NormEstimate, NormOptions, Quadrature};

/// max(0, 1 − (kl_max + ln 2)/ln M).
pub fn fano_bound(m: usize, kl_max: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::param("Fano needs at least 2 hypotheses"));
    }
    if !(kl_max >= 0.0) {
        return Err(Error::param("kl_max must be >= 0"));
    }
    // (kl + ln 2)/ln M written in base 2 so that kl = 0, M = 2^k is exact.
    Ok((1.0 - (kl_max / std::f64::consts::LN_2 + 1.0) / (m as f64).log2()).max(0.0))
}

/// Pathwise Gaussian-gradient KL (1/(2σ²)) Σ_t ‖∇G^u_t(θ_t) − ∇G^v_t(θ_t)‖²,
/// where `traj[t]` is the point at which the oracle for G_t was queried.
pub fn kl_along_trajectory(
    traj: &[Vector],
    env_u: &dyn LossSequence,
    env_v: &dyn LossSequence,
    sigma2: f64,
) -> Result<f64> {
    if traj.len() > env_u.len() || traj.len() > env_v.len() {
        return Err(Error::param("trajectory longer than the loss sequences"));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::param("sigma2 must be >= 0"));
    }
    let mut total = 0.0;
    let mut gu = Vec::new();
    let mut gv = Vec::new();
    for (t, theta) in traj.iter().enumerate() {
        let th = theta.as_slice();
        gu.resize(th.len(), 0.0);
        gv.resize(th.len(), 0.0);
        env_u.gradient(t, th, &mut gu);
        env_v.gradient(t, th, &mut gv);
        total += gu.iter().zip(&gv).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    if sigma2 == 0.0 {
        return Err(Error::Divergence("noiseless oracle with differing gradients".into()));
    }
    Ok(total / (2.0 * sigma2))
}

/// Number of iterates with ‖θ_t − center‖ ≤ r.
pub fn occupation_count(traj: &[Vector], r: f64, center: &Vector) -> Result<usize> {
    let r2 = r * r;
    let mut n = 0;
    for theta in traj {
        if theta.dist_sq(center)? <= r2 {
            n += 1;
        }
    }
    Ok(n)
}

/// Rare-visit radius c_r·σ·√(γ(1−β)/μ).
pub fn rare_visit_radius(c_r: f64, sigma2: f64, gamma: f64, beta: f64, mu: f64) -> f64 {
    c_r * (sigma2 * gamma * (1.0 - beta) / mu).sqrt()
}

/// Heavy-Ball trajectory θ_0..θ_{T−1} on a loss sequence with N(0, σ²I)
/// gradient noise, started at rest at `theta0`.
pub fn hb_trajectory(
    env: &dyn LossSequence,
    beta: f64,
    gamma: f64,
    sigma2: f64,
    theta0: &[f64],
    stream: &mut SeededStream,
) -> Vec<Vector> {
    let d = theta0.len();
    let mut theta = theta0.to_vec();
    let mut prev = theta.clone();
    let mut g = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let mut out = Vec::with_capacity(env.len());
    for t in 0..env.len() {
        out.push(Vector::from_raw(theta.clone()));
        env.gradient(t, &theta, &mut g);
        stream.fill_gaussian(&mut xi, sigma2);
        for i in 0..d {
            let next = theta[i] - gamma * (g[i] + xi[i]) + beta * (theta[i] - prev[i]);
            prev[i] = theta[i];
            theta[i] = next;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FanoConfig {
    pub beta: f64,
    pub gamma: f64,
    pub sigma2: f64,
    pub seeds: usize,
    pub seed: u64,
    /// Number of codewords simulated as the true environment.
    pub max_envs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FanoReport {
    pub m: usize,
    pub kl_max: f64,
    pub kl_mean: f64,
    /// Mean Occ_T(r) around the origin over simulated runs.
    pub mean_occupation: f64,
    /// (2Cμ²a²/σ²)·max occupation, the localization upper bound on KL.
    pub kl_localization_bound: f64,
    pub error_lower_bound: f64,
}

/// Simulates Heavy-Ball under several codeword environments, estimates the
/// pairwise KL by averaging pathwise KL over seeds, and plugs the largest into
/// Fano's bound.
pub fn fano_pipeline(family: &BlockFamily, cfg: &FanoConfig) -> Result<FanoReport> {
    if !(cfg.sigma2 > 0.0) {
        return Err(Error::Divergence("sigma2 must be positive".into()));
    }
    if cfg.seeds == 0 || cfg.max_envs == 0 {
        return Err(Error::param("need at least one seed and one environment"));
    }
    let m = family.len();
    let n_env = cfg.max_envs.min(m);
    let plus = family.plus()?;
    let signs: Vec<Vec<f64>> = (0..m).map(|k| family.signs(k)).collect::<Result<_>>()?;
    let c_loc = bump::localization_constant();
    let origin = Vector::zeros(family.d);
    // For each simulated environment: (mean KL to every other codeword, occupation).
    let per_env: Vec<(Vec<f64>, f64, f64)> = (0..n_env)
        .into_par_iter()
        .map(|u| -> Result<(Vec<f64>, f64, f64)> {
            let env = family.environment(u)?;
            let mut kl = vec![0.0; m];
            let mut occ_sum = 0.0;
            let mut occ_max = 0.0f64;
            let mut gap = vec![0.0; family.d];
            for s in 0..cfg.seeds {
                let mut stream = SeededStream::new(derive_seed(cfg.seed, &[u as u64, s as u64]), 0);
                let traj = hb_trajectory(&env, cfg.beta, cfg.gamma, cfg.sigma2, origin.as_slice(), &mut stream);
                let occ = occupation_count(&traj, family.r, &origin)? as f64;
                occ_sum += occ;
                occ_max = occ_max.max(occ);
                for (t, theta) in traj.iter().enumerate() {
                    plus.gradient_gap(theta.as_slice(), &mut gap);
                    let g2: f64 = gap.iter().map(|x| x * x).sum();
                    if g2 == 0.0 {
                        continue;
                    }
                    for (v, sv) in signs.iter().enumerate() {
                        if sv[t] != signs[u][t] {
                            kl[v] += g2 / (2.0 * cfg.sigma2);
                        }
                    }
                }
            }
            kl.iter_mut().for_each(|k| *k /= cfg.seeds as f64);
            Ok((kl, occ_sum / cfg.seeds as f64, occ_max))
        })
        .collect::<Result<_>>()?;
    let mut kl_max = 0.0f64;
    let mut kl_sum = 0.0;
    let mut n_pairs = 0usize;
    for (u, (kl, _, _)) in per_env.iter().enumerate() {
        for (v, &k) in kl.iter().enumerate() {
            if v != u {
                kl_max = kl_max.max(k);
                kl_sum += k;
                n_pairs += 1;
            }
        }
    }
    let mean_occupation = per_env.iter().map(|e| e.1).sum::<f64>() / n_env as f64;
    let occ_max = per_env.iter().map(|e| e.2).fold(0.0, f64::max);
    Ok(FanoReport {
        m,
        kl_max,
        kl_mean: if n_pairs > 0 { kl_sum / n_pairs as f64 } else { 0.0 },
        mean_occupation,
        kl_localization_bound: 2.0 * c_loc * plus.mu * plus.mu * plus.a * plus.a * occ_max / cfg.sigma2,
        error_lower_bound: fano_bound(m, kl_max)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupationReport {
    pub beta: f64,
    pub radius: f64,
    pub stationary_variance: f64,
    pub mean_occupation: f64,
    pub std_occupation: f64,
    /// T·√(2/π)·r/√v, the small-radius Gaussian prediction.
    pub predicted: f64,
}

/// Occupation of the rare-visit ball around 0 by 1-D Heavy-Ball on the static
/// quadratic (μ/2)θ² with N(0, σ²) gradient noise, started at 0.
#[allow(clippy::too_many_arguments)]
pub fn occupation_experiment(
    beta: f64,
    gamma: f64,
    mu: f64,
    sigma2: f64,
    c_r: f64,
    t_len: usize,
    seeds: usize,
    seed: u64,
) -> Result<OccupationReport> {
    let v = hb_stationary_variance(mu, gamma, beta, sigma2)?.v;
    let r = rare_visit_radius(c_r, sigma2, gamma, beta, mu);
    let sd = sigma2.sqrt();
    let counts: Vec<f64> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let mut stream = SeededStream::new(derive_seed(seed, &[s as u64]), 0);
            let (mut x, mut prev) = (0.0f64, 0.0f64);
            let mut n = 0usize;
            for _ in 0..t_len {
                if x.abs() <= r {
                    n += 1;
                }
                let next = x - gamma * (mu * x + sd * stream.normal()) + beta * (x - prev);
                prev = x;
                x = next;
            }
            n as f64
        })
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(OccupationReport {
        beta,
        radius: r,
        stationary_variance: v,
        mean_occupation: mean,
        std_occupation: var.sqrt(),
        predicted: t_len as f64 * (2.0 / std::f64::consts::PI).sqrt() * r / v.sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InertiaConfig {
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
    pub a: f64,
    pub sigma2: f64,
    pub t_len: usize,
    pub seeds: usize,
    pub seed: u64,
    /// Stability-cap constant: γ ≤ c0·(1−β)²/L with L = μ.
    pub c0: f64,
    /// Block length; defaults to τ_β.
    pub block_len: Option<usize>,
}

impl InertiaConfig {
    pub fn new(beta: f64, gamma: f64, mu: f64, a: f64, t_len: usize) -> Self {
        InertiaConfig {
            beta,
            gamma,
            mu,
            a,
            sigma2: 0.0,
            t_len,
            seeds: 20,
            seed: 0,
            c0: 0.25,
            block_len: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InertiaReport {
    pub regret_mean: f64,
    pub regret_std: f64,
    pub regret_per_step: f64,
    /// Regret divided by μa²T.
    pub regret_ratio: f64,
    pub tau_beta: f64,
    pub tau_proxy: f64,
    /// First t with |e_t| ≤ |e_0|/2 for the noiseless companion recursion
    /// started at rest one jump away from the new minimizer.
    pub tau_measured: usize,
    pub block_len: usize,
    pub n_blocks: usize,
    pub cap: f64,
}

/// Half-life of e_{t+1} = (1+β−γμ)e_t − βe_{t−1} from e_0 = e_{−1} = 1.
pub fn mean_error_half_life(beta: f64, gamma_mu: f64) -> Result<usize> {
    let (mut e, mut prev) = (1.0f64, 1.0f64);
    for t in 0..100_000_000usize {
        if e.abs() <= 0.5 {
            return Ok(t);
        }
        let next = (1.0 + beta - gamma_mu) * e - beta * prev;
        prev = e;
        e = next;
    }
    Err(Error::Stability("mean error did not halve".into()))
}

/// Heavy-Ball on (μ/2)(θ − x*_t)² with x*_t alternating between ±a in blocks.
/// Regret is Σ_{t<T} G_{t+1}(θ_t) − G_{t+1}(x*_{t+1}), averaged over seeds.
pub fn inertia_regret_experiment(cfg: &InertiaConfig) -> Result<InertiaReport> {
    let (beta, gamma, mu, a) = (cfg.beta, cfg.gamma, cfg.mu, cfg.a);
    if !(a > 0.0) || cfg.t_len == 0 || cfg.seeds == 0 {
        return Err(Error::param("need a > 0, T > 0 and at least one seed"));
    }
    let cap = cfg.c0 * (1.0 - beta).powi(2) / mu;
    if gamma > cap * (1.0 + 1e-12) {
        return Err(Error::Regime(format!(
            "gamma {gamma} exceeds the stability cap c0(1-beta)^2/L = {cap}"
        )));
    }
    let rt = response_time(mu, gamma, beta)?;
    let block_len = cfg.block_len.unwrap_or(rt.tau as usize).max(1);
    let sd = cfg.sigma2.sqrt();
    let target = |t: usize| if (t / block_len).is_multiple_of(2) { a } else { -a };
    let regrets: Vec<f64> = (0..cfg.seeds)
        .into_par_iter()
        .map(|s| {
            let mut stream = SeededStream::new(derive_seed(cfg.seed, &[s as u64]), 0);
            let (mut x, mut prev) = (a, a);
            let mut regret = 0.0;
            for t in 0..cfg.t_len {
                let e = x - target(t + 1);
                regret += 0.5 * mu * e * e;
                let noise = if sd > 0.0 { sd * stream.normal() } else { 0.0 };
                let next = x - gamma * (mu * e + noise) + beta * (x - prev);
                prev = x;
                x = next;
            }
            regret
        })
        .collect();
    let n = regrets.len() as f64;
    let mean = regrets.iter().sum::<f64>() / n;
    let var = regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(InertiaReport {
        regret_mean: mean,
        regret_std: var.sqrt(),
        regret_per_step: mean / cfg.t_len as f64,
        regret_ratio: mean / (mu * a * a * cfg.t_len as f64),
        tau_beta: rt.tau,
        tau_proxy: rt.proxy,
        tau_measured: mean_error_half_life(beta, gamma * mu)?,
        block_len,
        n_blocks: cfg.t_len.div_ceil(block_len),
        cap,
    })
}
