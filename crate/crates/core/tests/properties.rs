use proptest::prelude::*;

use drifttrack::bounds::{
    cap_mom, drift_functionals, hb_stationary_variance, lyapunov_residual, momentum_floor_coefficients,
    stability_matrix_gamma, RegimeParams,
};
use drifttrack::drift::{drift_increments, generate_path, DriftProcess, DriftWalker};
use drifttrack::hardinstance::bump::localization_constant;
use drifttrack::hardinstance::BumpLoss;
use drifttrack::optim::{run_tracking, MomentumConfig, Optimizer, RunOptions, Schedule};
use drifttrack::problems::{population_gradient, EvalContext, ProblemSpec};
use drifttrack::{SeededStream, Vector};

fn vec_of(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, d)
}

fn quad_run(opt: &Optimizer, d: usize, gamma: f64, seed: u64) -> Vec<(u64, u64)> {
    let spec = ProblemSpec::quadratic(d, 1.0, 0.1);
    let eval = EvalContext::new(&spec, 1, &mut SeededStream::new(seed, 3)).unwrap();
    let theta0 = Vector::zeros(d);
    let mut walker = DriftWalker::new(&DriftProcess::gaussian_walk(0.01), &theta0, 60, SeededStream::new(seed, 1)).unwrap();
    let sched = Schedule::constant(gamma, 60).unwrap();
    let out = run_tracking(&spec, &mut walker, opt, &sched, &mut SeededStream::new(seed, 2), &eval, &RunOptions::default())
        .unwrap();
    out.record
        .steps
        .iter()
        .map(|s| (s.tracking_error_sq.to_bits(), s.loss.to_bits()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mismatched_dimensions_are_errors(a in vec_of(3), b in vec_of(4)) {
        let (x, y) = (Vector::from_vec(a).unwrap(), Vector::from_vec(b).unwrap());
        prop_assert!(x.add(&y).is_err());
        prop_assert!(x.sub(&y).is_err());
        prop_assert!(x.dot(&y).is_err());
        prop_assert!(x.dist_sq(&y).is_err());
    }

    #[test]
    fn streams_replay(seed in any::<u64>(), id in 0u64..8) {
        let mut a = SeededStream::new(seed, id);
        let mut b = SeededStream::new(seed, id);
        for _ in 0..20 {
            prop_assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
    }

    #[test]
    fn paths_replay_and_walk_steps_are_exact(seed in any::<u64>(), delta in 1e-4f64..1.0, d in 1usize..20) {
        let p = DriftProcess::gaussian_walk(delta);
        let x0 = Vector::zeros(d);
        let a = generate_path(&p, &x0, 50, SeededStream::new(seed, 1)).unwrap();
        let b = generate_path(&p, &x0, 50, SeededStream::new(seed, 1)).unwrap();
        prop_assert_eq!(&a, &b);
        for inc in drift_increments(&a) {
            prop_assert!((inc - delta * delta).abs() <= 1e-12 * delta * delta);
        }
    }

    #[test]
    fn quadratic_is_exactly_strongly_monotone(a in vec_of(5), b in vec_of(5), mu in 0.1f64..10.0) {
        let spec = ProblemSpec::quadratic(5, mu, 0.0);
        let star = Vector::zeros(5);
        let (x, y) = (Vector::from_vec(a).unwrap(), Vector::from_vec(b).unwrap());
        let gm = population_gradient(&spec, &x, &star).unwrap().sub(&population_gradient(&spec, &y, &star).unwrap()).unwrap();
        let diff = x.sub(&y).unwrap();
        let lhs = gm.dot(&diff).unwrap();
        prop_assert!((lhs - mu * diff.norm_sq()).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn zero_momentum_is_sgd_bitwise(seed in any::<u64>(), gamma in 0.001f64..0.5, d in 1usize..12) {
        let sgd = quad_run(&Optimizer::Sgd, d, gamma, seed);
        prop_assert_eq!(&sgd, &quad_run(&Optimizer::Momentum(MomentumConfig::heavy_ball(0.0)), d, gamma, seed));
        prop_assert_eq!(&sgd, &quad_run(&Optimizer::Momentum(MomentumConfig::nesterov(0.0)), d, gamma, seed));
    }

    #[test]
    fn hb_and_nag_differ_for_positive_beta(seed in any::<u64>(), beta in 0.2f64..0.9) {
        let hb = quad_run(&Optimizer::Momentum(MomentumConfig::heavy_ball(beta)), 4, 0.5, seed);
        let nag = quad_run(&Optimizer::Momentum(MomentumConfig::nesterov(beta)), 4, 0.5, seed);
        prop_assert_ne!(hb, nag);
    }

    #[test]
    fn gamma_matrix_is_stable_under_the_cap(
        mu in 0.1f64..5.0,
        kappa in 1.0f64..200.0,
        beta in 0.0f64..0.99,
        frac in 0.001f64..1.0,
    ) {
        let p0 = RegimeParams::new(mu, mu * kappa, beta, 0.0, 1.0, 0.01).unwrap();
        let p = p0.with_gamma(frac * cap_mom(&p0));
        let g = stability_matrix_gamma(&p, 0.0, beta).unwrap();
        prop_assert!(g.spectral_radius < 1.0);
        prop_assert!(g.spectral_radius <= g.column_sum_bound * (1.0 + 1e-12));
    }

    #[test]
    fn stationary_covariance_solves_lyapunov(
        mu in 0.1f64..5.0,
        beta in 0.0f64..0.99,
        frac in 0.01f64..0.95,
        sigma2 in 0.01f64..10.0,
    ) {
        // stable iff γμ < 2(1+β)
        let gamma = frac * 2.0 * (1.0 + beta) / mu;
        let hb = hb_stationary_variance(mu, gamma, beta, sigma2).unwrap();
        let res = lyapunov_residual(mu, gamma, beta, sigma2, &hb.covariance());
        prop_assert!(res <= 1e-12 * hb.v.max(1.0), "residual {res}");
    }

    #[test]
    fn functionals_match_brute_force(xs in prop::collection::vec(0.0f64..1.0, 1..300), gamma in 0.001f64..0.5) {
        let p = RegimeParams::new(1.0, 2.0, 0.5, gamma, 1.0, 0.01).unwrap();
        let w = 1.0 - gamma / 2.0;
        let brute: f64 = xs.iter().enumerate().map(|(l, x)| w.powi((xs.len() - l - 1) as i32) * x).sum();
        let f = drift_functionals(&xs, None, &p).unwrap();
        prop_assert!((f.d_t - brute).abs() <= 1e-12 * brute.max(1e-300));
    }

    #[test]
    fn momentum_floor_terms_grow_with_beta(b1 in 0.0f64..0.98, db in 0.0f64..0.5, delta in 0.0f64..1.0) {
        let b2 = (b1 + db).min(0.99);
        let p1 = RegimeParams::new(1.0, 3.0, b1, 0.01, 1.0, delta).unwrap();
        let p2 = RegimeParams { beta: b2, ..p1 };
        let (a1, c1) = momentum_floor_coefficients(&p1);
        let (a2, c2) = momentum_floor_coefficients(&p2);
        prop_assert!(a2 >= a1 && c2 >= c1);
    }

    #[test]
    fn bump_gap_is_localized(th in vec_of(2), scale in 0.01f64..2.0, mu in 0.5f64..3.0) {
        let (a, r) = (0.05, 0.4);
        let plus = BumpLoss::localized(mu, a, r, 1.0, 2).unwrap();
        let theta: Vec<f64> = th.iter().map(|x| x * scale * r / 5.0).collect();
        let mut gap = vec![0.0; 2];
        plus.gradient_gap(&theta, &mut gap);
        let g2: f64 = gap.iter().map(|x| x * x).sum();
        let n = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n >= r {
            prop_assert_eq!(g2, 0.0);
        }
        prop_assert!(g2 <= 4.0 * localization_constant() * mu * mu * a * a * (1.0 + 1e-6));
    }

    #[test]
    fn bump_pair_is_separated(th in vec_of(2), mu in 0.5f64..3.0) {
        let a = 0.01;
        let plus = BumpLoss::new(mu, a, 300.0 * a, 1.0, 2).unwrap();
        let minus = plus.with_sign(-1.0);
        let theta: Vec<f64> = th.iter().map(|x| x * a).collect();
        let sep = plus.value(&theta) - plus.min_value() + minus.value(&theta) - minus.min_value();
        prop_assert!(sep >= mu * a * a / 8.0 * (1.0 - 1e-9));
    }

    #[test]
    fn bump_hessian_stays_near_mu(th in vec_of(2)) {
        let (mu, a) = (1.0, 0.01);
        let f = BumpLoss::new(mu, a, 300.0 * a, 1.0, 2).unwrap();
        let theta: Vec<f64> = th.iter().map(|x| x * f.r / 4.0).collect();
        let h = 1e-5 * f.r;
        let mut hess = [[0.0; 2]; 2];
        for j in 0..2 {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[j] += h;
            dn[j] -= h;
            let (_, gu) = f.value_and_gradient_slice(&up);
            let (_, gd) = f.value_and_gradient_slice(&dn);
            for i in 0..2 {
                hess[i][j] = (gu[i] - gd[i]) / (2.0 * h);
            }
        }
        // operator norm of the symmetric part of H − μI
        let (p, q, s) = (hess[0][0] - mu, hess[1][1] - mu, 0.5 * (hess[0][1] + hess[1][0]));
        let op = (0.5 * (p + q)).abs() + (0.25 * (p - q).powi(2) + s * s).sqrt();
        prop_assert!(op <= f.hessian_deviation_bound() + 1e-5);
        prop_assert!(op <= mu / 4.0);
    }
}
