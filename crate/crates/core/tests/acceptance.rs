//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails. Run with `--nocapture` to see the report.

use std::collections::HashMap;

use drifttrack::bounds::{
    cap_mom, drift_functionals, golden_section_min, hb_stationary_variance, lyapunov_residual,
    momentum_floor, momentum_floor_and_gamma, momentum_step_decay_schedule, rho_tilde, sgd_floor,
    sgd_floor_and_gamma, sgd_gamma_cap, sgd_step_decay_schedule, stability_matrix_gamma, RegimeParams,
};
use drifttrack::drift::{DriftProcess, DriftWalker};
use drifttrack::hardinstance::family::min_pairwise_distance;
use drifttrack::hardinstance::gvar::gradient_distance;
use drifttrack::hardinstance::{
    build_block_family, constant_weight_packing, discrepancy_lower, fano_bound, hb_trajectory,
    inertia_regret_experiment, kl_along_trajectory, mean_error_half_life, occupation_count, occupation_experiment,
    BumpLoss, FamilyOptions, InertiaConfig, NormOptions, PackingOptions, Quadrature,
};
use drifttrack::optim::{run_tracking, MomentumConfig, Optimizer, OptimizerState, RunOptions, Schedule};
use drifttrack::problems::{log_spaced, EvalContext, GradSample, ProblemSpec};
use drifttrack::runner::{aggregate, execute, expand_value, Method};
use drifttrack::{derive_seed, SeededStream, Vector};
use serde_json::json;

// Tolerances, pinned.
const SPOT_REL_TOL: f64 = 0.30;
const VARIANCE_REL_TOL: f64 = 0.05;
const LYAPUNOV_TOL: f64 = 1e-12;
const STATIC_CONVERGENCE: f64 = 1e-8;
const MODAL_CROSSCHECK_TOL: f64 = 1e-6;
const FLOOR_FACTOR: f64 = 8.0;
const GOLDEN_REL_TOL: f64 = 1e-10;
const FUNCTIONAL_REL_TOL: f64 = 1e-12;
const FD_TOL: f64 = 1e-6;
const GVAR_SPREAD: f64 = 0.10;
const HALF_LIFE_R2: f64 = 0.95;
const REGRET_SLOPE_SPREAD: f64 = 0.20;
const OCCUPATION_FACTOR: f64 = 2.0;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_1() -> Outcome {
    let grid = expand_value(&json!({
        "task": "quadratic",
        "d": 100,
        "T": 5000,
        "seeds": 20,
        "drift": {"kind": "directed", "delta_rw": 0.01},
        "gamma": [0.01, 0.1],
        "beta": [0.5, 0.9, 0.95, 0.99],
        "sigma2": [0.1, 0.5, 0.8],
        "method": ["sgd", "hb", "nag"],
        "record_every": 5000
    }))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8);
    let rep = execute(&grid, dir.path(), threads).unwrap();
    if !rep.failed.is_empty() {
        return (false, format!("{} configs failed", rep.failed.len()));
    }
    let mut cell = HashMap::new();
    for c in aggregate(dir.path(), 1).unwrap() {
        let key = (c.gamma.to_bits(), c.beta.to_bits(), c.sigma2.to_bits(), c.method);
        cell.insert(key, c.mean_final);
    }
    let get = |g: f64, b: f64, s: f64, m: Method| cell[&(g.to_bits(), b.to_bits(), s.to_bits(), m)];
    let mut ok = true;
    let mut notes = Vec::new();
    for b in [0.9, 0.95, 0.99] {
        for s in [0.1, 0.5, 0.8] {
            let (sgd, hb, nag) = (get(0.1, b, s, Method::Sgd), get(0.1, b, s, Method::Hb), get(0.1, b, s, Method::Nag));
            if !(sgd < nag && nag < hb) {
                ok = false;
                notes.push(format!("order fails at beta={b} sigma2={s}: {sgd:.3}/{nag:.3}/{hb:.3}"));
            }
        }
    }
    for s in [0.1, 0.5, 0.8] {
        let (sgd, hb) = (get(0.01, 0.5, s, Method::Sgd), get(0.01, 0.5, s, Method::Hb));
        if hb >= sgd || hb.is_nan() {
            ok = false;
            notes.push(format!("HB >= SGD at sigma2={s}"));
        }
    }
    for (g, b, s, m, want) in [
        (0.01, 0.5, 0.1, Method::Hb, 0.34),
        (0.01, 0.99, 0.8, Method::Hb, 38.80),
        (0.1, 0.99, 0.8, Method::Hb, 401.37),
        (0.1, 0.99, 0.8, Method::Sgd, 4.11),
    ] {
        let got = get(g, b, s, m);
        let pass = rel(got, want) <= SPOT_REL_TOL;
        ok &= pass;
        notes.push(format!("({g},{b},{s}) {}={got:.3} vs {want}", m.label()));
    }
    (ok, notes.join("; "))
}

fn criterion_2() -> Outcome {
    let tasks = [
        json!({"task": "quadratic", "d": 8, "kappa": 10}),
        json!({"task": "linreg", "d": 6, "kappa": 10, "batch": 16}),
        json!({"task": "logreg", "d": 6, "kappa": 10, "batch": 16}),
        json!({"task": "mlp", "d": 4, "hidden": 8, "batch": 16, "gamma": 0.02, "eval_size": 64}),
        json!({"task": "bump", "d": 2, "a": 0.05, "r": 1.0, "sigma2": 0.01}),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for t in tasks {
        let mut v = t.clone();
        v["T"] = json!(300);
        v["seeds"] = json!(2);
        v["beta"] = json!(0.0);
        let base = expand_value(&v).unwrap().remove(0);
        let bits = |m: Method| {
            let mut c = base.clone();
            c.method = m;
            let r = c.run_seed(1).unwrap();
            let steps: Vec<(usize, u64, u64, Option<u64>)> = r
                .steps
                .iter()
                .map(|s| (s.t, s.tracking_error_sq.to_bits(), s.loss.to_bits(), s.metric.map(f64::to_bits)))
                .collect();
            (r.seed, steps)
        };
        let sgd = bits(Method::Sgd);
        let same = sgd == bits(Method::Hb) && sgd == bits(Method::Nag) && sgd.1.len() == 301;
        ok &= same;
        notes.push(format!("{}:{}", t["task"].as_str().unwrap(), if same { "identical" } else { "DIFFER" }));
    }
    (ok, notes.join(" "))
}

fn criterion_3() -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let mut k = 0u64;
    for mu in [1.0, 0.5] {
        for beta in [0.0, 0.5, 0.9] {
            for gamma in [0.05, 0.2] {
                let sigma2 = if beta == 0.5 { 0.5 } else { 1.0 };
                let hb = hb_stationary_variance(mu, gamma, beta, sigma2).unwrap();
                let res = lyapunov_residual(mu, gamma, beta, sigma2, &hb.covariance());
                let mut s = SeededStream::new(derive_seed(3, &[k]), 0);
                k += 1;
                let sd = sigma2.sqrt();
                let (mut x, mut prev) = (0.0f64, 0.0f64);
                let burn = 10_000;
                let n = 1_000_000;
                let (mut sum, mut sum2) = (0.0, 0.0);
                for t in 0..burn + n {
                    let next = x - gamma * (mu * x + sd * s.normal()) + beta * (x - prev);
                    prev = x;
                    x = next;
                    if t >= burn {
                        sum += x;
                        sum2 += x * x;
                    }
                }
                let mean = sum / n as f64;
                let var = sum2 / n as f64 - mean * mean;
                let e = rel(var, hb.v);
                worst = worst.max(e);
                worst_res = worst_res.max(res);
                ok &= e <= VARIANCE_REL_TOL && res <= LYAPUNOV_TOL;
            }
        }
    }
    (ok, format!("12 combos, worst variance rel err {worst:.4}, worst Lyapunov residual {worst_res:.2e}"))
}

type Mat = [[f64; 2]; 2];

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn mat_pow(m: &Mat, mut n: u64) -> Mat {
    let mut acc = [[1.0, 0.0], [0.0, 1.0]];
    let mut base = *m;
    while n > 0 {
        if n & 1 == 1 {
            acc = mat_mul(&acc, &base);
        }
        base = mat_mul(&base, &base);
        n >>= 1;
    }
    acc
}

/// ‖θ_T‖² for noiseless HB on diag(eigs) from θ_0 = θ_{−1} = 1, mode by mode.
fn modal_error(eigs: &[f64], beta: f64, gamma: f64, t: u64) -> f64 {
    eigs.iter()
        .map(|&l| {
            let m = mat_pow(&[[1.0 + beta - gamma * l, -beta], [1.0, 0.0]], t);
            let e = m[0][0] + m[0][1];
            e * e
        })
        .sum()
}

fn stepped_error(eigs: &[f64], beta: f64, gamma: f64, t: usize) -> f64 {
    let mut state = OptimizerState::new(Vector::from_vec(vec![1.0; eigs.len()]).unwrap());
    let cfg = MomentumConfig::heavy_ball(beta);
    for _ in 0..t {
        state
            .momentum_in_place(&cfg, gamma, |th| {
                let g: Vec<f64> = th.as_slice().iter().zip(eigs).map(|(x, l)| x * l).collect();
                Ok(GradSample {
                    grad: Vector::from_vec(g).unwrap(),
                    loss: 0.0,
                })
            })
            .unwrap();
    }
    state.theta.norm_sq()
}

fn criterion_4() -> Outcome {
    let d = 10;
    let mut ok = true;
    let mut worst_rho: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut crosschecks = 0;
    for kappa in [1.0, 10.0, 100.0] {
        let eigs = log_spaced(d, kappa);
        for bi in 0..10 {
            let beta = bi as f64 / 10.0;
            for fi in 1..=10 {
                let p0 = RegimeParams::new(1.0, kappa, beta, 0.0, 0.0, 0.0).unwrap();
                let gamma = fi as f64 / 10.0 * cap_mom(&p0);
                let p = p0.with_gamma(gamma);
                let rho = stability_matrix_gamma(&p, 0.0, beta).unwrap().spectral_radius;
                worst_rho = worst_rho.max(rho);
                ok &= rho < 1.0;
                let t = (50.0 * (1.0 - beta) / gamma).ceil() as u64 + 100;
                let ratio = modal_error(&eigs, beta, gamma, t) / d as f64;
                worst_ratio = worst_ratio.max(ratio);
                ok &= ratio < STATIC_CONVERGENCE;
                if t <= 20_000 {
                    crosschecks += 1;
                    let tc = (t / 4) as usize;
                    let a = modal_error(&eigs, beta, gamma, tc as u64);
                    let b = stepped_error(&eigs, beta, gamma, tc);
                    ok &= rel(b, a) <= MODAL_CROSSCHECK_TOL;
                }
            }
        }
    }
    (
        ok,
        format!("300 points, max spectral radius {worst_rho:.9}, max final/initial {worst_ratio:.2e}, {crosschecks} step-loop cross-checks"),
    )
}

fn mean_final_error(spec: &ProblemSpec, opt: &Optimizer, sched: &Schedule, e0_sq: f64, seeds: u64) -> f64 {
    let eval = EvalContext::new(spec, 1, &mut SeededStream::new(0, 3)).unwrap();
    let drift = DriftProcess::gaussian_walk(0.01);
    let mut total = 0.0;
    for s in 0..seeds {
        let theta_star = Vector::zeros(spec.d);
        let mut walker = DriftWalker::new(&drift, &theta_star, sched.horizon(), SeededStream::new(s, 1)).unwrap();
        let offset = (e0_sq / spec.d as f64).sqrt();
        let opts = RunOptions {
            theta0: Some(Vector::from_vec(vec![offset; spec.d]).unwrap()),
            record_every: sched.horizon(),
            ..RunOptions::default()
        };
        let mut noise = SeededStream::new(s, 2);
        let out = run_tracking(spec, &mut walker, opt, sched, &mut noise, &eval, &opts).unwrap();
        total += out.record.final_error().unwrap_or(f64::INFINITY);
    }
    total / seeds as f64
}

fn criterion_5() -> Outcome {
    let d = 10;
    let spec = ProblemSpec::quadratic_diag(log_spaced(d, 5.0), 1.0 / d as f64);
    let p_sgd = RegimeParams::new(1.0, 5.0, 0.0, 0.0, 1.0, 0.01).unwrap();
    let p_mom = RegimeParams::new(1.0, 5.0, 0.5, 0.0, 1.0, 0.01).unwrap();
    let s = sgd_floor_and_gamma(&p_sgd).unwrap();
    let m = momentum_floor_and_gamma(&p_mom).unwrap();
    let (_, gs) = golden_section_min(|g| sgd_floor(&p_sgd, g), 0.0, sgd_gamma_cap(&p_sgd), 300);
    let (_, gm) = golden_section_min(|g| momentum_floor(&p_mom, g), 0.0, cap_mom(&p_mom), 300);
    let oracle_ok = rel(gs, s.floor) <= GOLDEN_REL_TOL && rel(gm, m.floor) <= GOLDEN_REL_TOL;

    // start far above each floor so the burn-in epoch has work to do
    let (e0_s, e0_m) = (1e3 * s.floor, 1e3 * m.floor);
    let sched_s = sgd_step_decay_schedule(&p_sgd, e0_s).unwrap();
    let sched_m = momentum_step_decay_schedule(&p_mom, e0_m).unwrap();
    let es = mean_final_error(&spec, &Optimizer::Sgd, &sched_s, e0_s, 20);
    let em = mean_final_error(&spec, &Optimizer::Momentum(MomentumConfig::heavy_ball(0.5)), &sched_m, e0_m, 20);
    let ok = oracle_ok && es <= FLOOR_FACTOR * s.floor && em <= FLOOR_FACTOR * m.floor;
    (
        ok,
        format!(
            "E={:.4e} (golden {:.4e}), SGD from e0^2={e0_s:.1e} mean final {es:.4e} over T={}; E_beta={:.4e} (golden {:.4e}), HB restart from e0^2={e0_m:.1e} mean final {em:.4e} over T={}",
            s.floor,
            gs,
            sched_s.horizon(),
            m.floor,
            gm,
            sched_m.horizon()
        ),
    )
}

fn brute(xs: &[f64], w: f64) -> f64 {
    let t = xs.len();
    let mut total = 0.0;
    for (l, x) in xs.iter().enumerate() {
        let mut pw = 1.0;
        for _ in 0..(t - l - 1) {
            pw *= w;
        }
        total += pw * x;
    }
    total
}

fn criterion_6() -> Outcome {
    let p = RegimeParams::new(1.0, 4.0, 0.9, 0.002, 1.0, 0.01).unwrap();
    let w = 1.0 - p.gamma * p.mu / 2.0;
    let rt = rho_tilde(&p);
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let mut s = SeededStream::new(seed, 0);
        let inc: Vec<f64> = (0..1000).map(|_| s.normal().powi(2) * 1e-4).collect();
        let forcing: Vec<f64> = (0..1000).map(|_| s.uniform() * 1e-3).collect();
        let f = drift_functionals(&inc, Some(&forcing), &p).unwrap();
        for (got, want) in [
            (f.d_t, brute(&inc, w)),
            (f.d2_t, brute(&inc, w * w)),
            (f.dmom_t, brute(&forcing, rt)),
            (f.dmom2_t, brute(&forcing, rt * rt)),
        ] {
            let e = rel(got, want);
            worst = worst.max(e);
            ok &= e <= FUNCTIONAL_REL_TOL;
        }
    }
    let mut burst_ok = true;
    for k in [0usize, 1, 7, 100, 999] {
        let mut burst = vec![0.0; 1000];
        burst[1000 - 1 - k] = 1.0;
        let f = drift_functionals(&burst, None, &p).unwrap();
        let exact = (0..k).fold(1.0, |acc, _| acc * w);
        burst_ok &= f.d_t == exact;
    }
    ok &= burst_ok;
    (ok, format!("worst rel err {worst:.2e} at T=1000; single-burst exact: {burst_ok}"))
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // (a) finite differences
    let mut fd_err: f64 = 0.0;
    let mut s = SeededStream::new(9, 0);
    for (mu, a, r, d) in [(1.0, 0.05, 1.0, 2), (2.0, 0.1, 0.5, 3), (1.0, 0.025, 0.1, 1)] {
        let f = BumpLoss::localized(mu, a, r, 1.0, d).unwrap();
        for _ in 0..50 {
            let th: Vec<f64> = (0..d).map(|_| (s.uniform() * 2.0 - 1.0) * 1.2 * r).collect();
            let (_, g) = f.value_and_gradient_slice(&th);
            for i in 0..d {
                let h = 1e-6 * r;
                let (mut up, mut dn) = (th.clone(), th.clone());
                up[i] += h;
                dn[i] -= h;
                let fd = (f.value(&up) - f.value(&dn)) / (2.0 * h);
                fd_err = fd_err.max((fd - g[i]).abs());
            }
        }
    }
    let a_ok = fd_err <= FD_TOL;
    ok &= a_ok;
    notes.push(format!("(a) max |fd-grad| {fd_err:.1e}"));

    // (b) discrepancy
    let mut b_ok = true;
    for (mu, a) in [(1.0, 0.05), (1.0, 0.1), (2.0, 0.1)] {
        // r chosen so that a/r sits inside the strongly convex regime
        let plus = BumpLoss::new(mu, a, 300.0 * a, 1.0, 2).unwrap();
        let chi = discrepancy_lower(&plus, &plus.with_sign(-1.0), 241).unwrap().chi;
        b_ok &= chi >= mu * a * a / 8.0;
    }
    ok &= b_ok;
    notes.push(format!("(b) chi >= mu a^2/8: {b_ok}"));

    // (c) packing
    let mut c_ok = true;
    for j in [16usize, 32, 64] {
        let words = constant_weight_packing(j, &PackingOptions::default(), &mut SeededStream::new(j as u64, 0)).unwrap();
        let size_ok = words.len() as f64 >= (0.0625 * j as f64).exp();
        let dist_ok = min_pairwise_distance(&words) as f64 >= j as f64 / 16.0;
        c_ok &= size_ok && dist_ok;
        notes.push(format!("J={j}: {} words, min dist {}", words.len(), min_pairwise_distance(&words)));
    }
    ok &= c_ok;

    // (d) single-switch scaling
    let (d, pnorm) = (2.0, 2.0);
    let mut cs = Vec::new();
    for r in [0.1f64, 0.2, 0.4] {
        let a = r / 4.0;
        let plus = BumpLoss::localized(1.0, a, r, 1.0, 2).unwrap();
        let opts = NormOptions {
            quadrature: Quadrature::GaussLegendre { panels: 64, order: 8 },
            ..NormOptions::new(2.0, 2)
        };
        let v = gradient_distance(&plus, &plus.with_sign(-1.0), &opts).unwrap().value;
        cs.push(v / (a * r.powf(d / pnorm)));
    }
    let mean = cs.iter().sum::<f64>() / 3.0;
    let d_ok = cs.iter().all(|c| rel(*c, mean) <= GVAR_SPREAD);
    ok &= d_ok;
    notes.push(format!("(d) C = {:.4}/{:.4}/{:.4}", cs[0], cs[1], cs[2]));

    // (e) Fano arithmetic
    let e_ok = fano_bound(4, 0.0).unwrap() == 0.5;
    ok &= e_ok;
    notes.push(format!("(e) {e_ok}"));

    // (f) exact zeros
    let opts = FamilyOptions {
        seed: 1,
        packing: PackingOptions::default(),
        norm: Some(NormOptions {
            quadrature: Quadrature::GaussLegendre { panels: 16, order: 8 },
            ..NormOptions::new(2.0, 2)
        }),
    };
    let fam = build_block_family(160, 16, 1.0, 0.05, 0.5, 2, 2.0, 1.0, &opts).unwrap();
    let (u, v) = (fam.environment(0).unwrap(), fam.environment(1).unwrap());
    let traj = hb_trajectory(&u, 0.5, 0.05, 0.01, &[0.0, 0.0], &mut SeededStream::new(2, 0));
    let far: Vec<Vector> = (0..160).map(|t| Vector::from_vec(vec![2.0 + t as f64, 1.0]).unwrap()).collect();
    let same = kl_along_trajectory(&traj, &u, &u, 0.01).unwrap();
    let away = kl_along_trajectory(&far, &u, &v, 0.01).unwrap();
    let occ = occupation_count(&far, fam.r, &Vector::zeros(2)).unwrap();
    let f_ok = same == 0.0 && away == 0.0 && occ == 0;
    ok &= f_ok;
    notes.push(format!("(f) {f_ok}"));
    (ok, notes.join("; "))
}

fn criterion_8() -> Outcome {
    let (mu, c0) = (1.0, 0.25);
    let mut xs = Vec::new();
    let mut hs = Vec::new();
    for beta in [0.5, 0.7, 0.9, 0.95] {
        let gamma = c0 * (1.0f64 - beta).powi(2) / mu;
        xs.push((1.0 - beta) / (gamma * mu));
        hs.push(mean_error_half_life(beta, gamma * mu).unwrap() as f64);
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, hs.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&hs).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = hs.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);

    let beta = 0.9;
    let gamma = c0 * (1.0f64 - beta).powi(2) / mu;
    let slopes: Vec<f64> = [2000usize, 4000, 8000]
        .iter()
        .map(|&t| {
            let cfg = InertiaConfig {
                seeds: 4,
                ..InertiaConfig::new(beta, gamma, mu, 0.5, t)
            };
            inertia_regret_experiment(&cfg).unwrap().regret_mean / t as f64
        })
        .collect();
    let ms = slopes.iter().sum::<f64>() / 3.0;
    let slope_ok = slopes.iter().all(|s| rel(*s, ms) <= REGRET_SLOPE_SPREAD);
    (
        r2 >= HALF_LIFE_R2 && slope_ok,
        format!(
            "half-lives {hs:?} vs (1-b)/(g mu) {:?}, R^2 {r2:.4}; regret/T {:.4}/{:.4}/{:.4}",
            xs.iter().map(|x| x.round()).collect::<Vec<_>>(),
            slopes[0],
            slopes[1],
            slopes[2]
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut ratios = Vec::new();
    for (i, beta) in [0.5, 0.9, 0.99].into_iter().enumerate() {
        let rep = occupation_experiment(beta, 0.01, 1.0, 1.0, 0.5, 100_000, 100, 40 + i as u64).unwrap();
        ratios.push(rep.mean_occupation / (1.0 - beta));
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
    (
        lo > 0.0 && hi / lo <= OCCUPATION_FACTOR,
        format!("Occ/(1-beta) = {:.0}/{:.0}/{:.0}, max/min {:.3}", ratios[0], ratios[1], ratios[2], hi / lo),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("quadratic grid ordering and spot values", criterion_1),
        ("beta = 0 bitwise equals SGD", criterion_2),
        ("HB stationary variance", criterion_3),
        ("stability certificate", criterion_4),
        ("step-decay schedules reach the floor", criterion_5),
        ("drift functionals", criterion_6),
        ("hard-instance suite", criterion_7),
        ("inertia regime", criterion_8),
        ("occupation scaling", criterion_9),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let (pass, detail) = f();
        println!(
            "criterion {}: {} [{name}] {detail} ({:.1}s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
