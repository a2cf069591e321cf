//! SGD and generalized momentum, step-size schedules with optional momentum
//! restart, and the single-run tracking loop.
//!
//! Generalized momentum with (β₁, β₂), β₁β₂ = 0:
//!   ψ_t     = θ_t + β₁(θ_t − θ_{t−1})
//!   θ_{t+1} = ψ_t − γ∇g(ψ_t) + β₂(ψ_t − ψ_{t−1})
//! Heavy-Ball is (0, β) and Nesterov is (β, 0).

use serde::{Deserialize, Serialize};

use crate::drift::{DriftWalker, MinimizerPath};
use crate::error::{Error, Result};
use crate::problems::{stochastic_gradient, EvalContext, GradSample, ProblemSpec};
use crate::record::{RunRecord, StepRecord};
use crate::rng::SeededStream;
use crate::vector::Vector;

pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumConfig {
    pub beta1: f64,
    pub beta2: f64,
}

impl MomentumConfig {
    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        let cfg = MomentumConfig { beta1, beta2 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sgd() -> Self {
        MomentumConfig {
            beta1: 0.0,
            beta2: 0.0,
        }
    }

    pub fn heavy_ball(beta: f64) -> Self {
        MomentumConfig {
            beta1: 0.0,
            beta2: beta,
        }
    }

    pub fn nesterov(beta: f64) -> Self {
        MomentumConfig {
            beta1: beta,
            beta2: 0.0,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta1 + self.beta2
    }

    /// β′ = ββ₁ + β₂: β for Heavy-Ball, β² for Nesterov.
    pub fn beta_prime(&self) -> f64 {
        self.beta() * self.beta1 + self.beta2
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::param(format!("{name} = {b} must lie in [0, 1)")));
            }
        }
        if self.beta1 * self.beta2 != 0.0 {
            return Err(Error::param("one of beta1, beta2 must be zero"));
        }
        if self.beta() >= 1.0 {
            return Err(Error::param("beta1 + beta2 must be < 1"));
        }
        Ok(())
    }
}

/// Which update rule a run uses. `Momentum(MomentumConfig::sgd())` runs the
/// momentum code path with zero coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Sgd,
    Momentum(MomentumConfig),
}

impl Optimizer {
    pub fn beta(&self) -> f64 {
        match self {
            Optimizer::Sgd => 0.0,
            Optimizer::Momentum(c) => c.beta(),
        }
    }
}

/// (θ_t, θ_{t−1}, ψ_{t−1}) and the step index.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub theta: Vector,
    pub theta_prev: Vector,
    pub psi_prev: Vector,
    pub t: usize,
}

impl OptimizerState {
    /// Zero-momentum start θ_{−1} = θ_0.
    pub fn new(theta0: Vector) -> Self {
        OptimizerState {
            theta_prev: theta0.clone(),
            psi_prev: theta0.clone(),
            theta: theta0,
            t: 0,
        }
    }

    fn check(&self, step: usize) -> Result<()> {
        if self.theta.is_finite() {
            Ok(())
        } else {
            Err(Error::Aborted {
                step,
                reason: "non-finite iterate".into(),
            })
        }
    }

    pub fn sgd_in_place(&mut self, grad: &Vector, gamma: f64) -> Result<()> {
        if !(gamma > 0.0) {
            return Err(Error::param("gamma must be positive"));
        }
        self.theta.check_dim(grad)?;
        let g = grad.as_slice();
        let prev = self.theta_prev.as_mut_slice();
        let psi_prev = self.psi_prev.as_mut_slice();
        for (i, x) in self.theta.as_mut_slice().iter_mut().enumerate() {
            prev[i] = *x;
            psi_prev[i] = *x;
            *x -= gamma * g[i];
        }
        self.t += 1;
        self.check(self.t)
    }

    /// One momentum step; returns the gradient sample taken at ψ_t.
    pub fn momentum_in_place<F>(&mut self, cfg: &MomentumConfig, gamma: f64, mut grad_at: F) -> Result<GradSample>
    where
        F: FnMut(&Vector) -> Result<GradSample>,
    {
        if !(gamma > 0.0) {
            return Err(Error::param("gamma must be positive"));
        }
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let mut psi = self.theta.clone();
        if b1 != 0.0 {
            let prev = self.theta_prev.as_slice();
            for (i, p) in psi.as_mut_slice().iter_mut().enumerate() {
                *p += b1 * (*p - prev[i]);
            }
        }
        let sample = grad_at(&psi)?;
        psi.check_dim(&sample.grad)?;
        let g = sample.grad.as_slice();
        let ps = psi.as_slice();
        let psi_prev = self.psi_prev.as_slice();
        let mut next = Vec::with_capacity(ps.len());
        for i in 0..ps.len() {
            let mut x = ps[i] - gamma * g[i];
            if b2 != 0.0 {
                x += b2 * (ps[i] - psi_prev[i]);
            }
            next.push(x);
        }
        self.theta_prev = std::mem::replace(&mut self.theta, Vector::from_raw(next));
        self.psi_prev = psi;
        self.t += 1;
        self.check(self.t)?;
        Ok(sample)
    }

    /// Zeroes the velocity: θ_{t−1} = ψ_{t−1} = θ_t.
    pub fn restart(&mut self) {
        self.theta_prev = self.theta.clone();
        self.psi_prev = self.theta.clone();
    }
}

/// θ_{t+1} = θ_t − γ·grad.
pub fn step_sgd(state: &OptimizerState, grad: &GradSample, gamma: f64) -> Result<OptimizerState> {
    let mut next = state.clone();
    next.sgd_in_place(&grad.grad, gamma)?;
    Ok(next)
}

/// One generalized-momentum step with the gradient evaluated at ψ_t.
pub fn step_momentum<F>(state: &OptimizerState, cfg: &MomentumConfig, gamma: f64, grad_at: F) -> Result<OptimizerState>
where
    F: FnMut(&Vector) -> Result<GradSample>,
{
    cfg.validate()?;
    let mut next = state.clone();
    next.momentum_in_place(cfg, gamma, grad_at)?;
    Ok(next)
}

pub fn restart_momentum(state: &OptimizerState) -> OptimizerState {
    let mut next = state.clone();
    next.restart();
    next
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    StepDecaySgd,
    StepDecayMomentum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub gamma: f64,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub gamma0: f64,
    pub gamma_star: f64,
    pub epochs: Vec<Epoch>,
    /// Reset the momentum buffer at the start of every epoch after the first.
    pub restart: bool,
}

impl Schedule {
    pub fn constant(gamma: f64, horizon: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::param("gamma must be positive"));
        }
        Ok(Schedule {
            kind: ScheduleKind::Constant,
            gamma0: gamma,
            gamma_star: gamma,
            epochs: vec![Epoch { gamma, len: horizon }],
            restart: false,
        })
    }

    /// γ_k = (γ_{k−1} + γ*)/2 for k = 1..K−1 with K = 1 + ⌈log₂(γ₀/γ*)⌉, or a
    /// single epoch when γ* ≥ γ₀. `t0` is the first epoch length and
    /// `len_k(γ_k)` the later ones; lengths below one are raised to one.
    pub fn step_decay(
        kind: ScheduleKind,
        gamma0: f64,
        gamma_star: f64,
        t0: f64,
        len_k: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma_star > 0.0 && gamma0.is_finite() && gamma_star.is_finite()) {
            return Err(Error::param("step decay needs positive finite gamma0 and gamma_star"));
        }
        let k = if gamma_star >= gamma0 {
            1
        } else {
            1 + (gamma0 / gamma_star).log2().ceil() as usize
        };
        let clamp = |x: f64| if x.is_finite() && x >= 1.0 { x.ceil() as usize } else { 1 };
        let mut epochs = vec![Epoch {
            gamma: gamma0,
            len: clamp(t0),
        }];
        let mut g = gamma0;
        for _ in 1..k {
            g = 0.5 * (g + gamma_star);
            epochs.push(Epoch {
                gamma: g,
                len: clamp(len_k(g)),
            });
        }
        Ok(Schedule {
            kind,
            gamma0,
            gamma_star,
            epochs,
            restart: kind == ScheduleKind::StepDecayMomentum,
        })
    }

    /// Number of epochs K.
    pub fn k(&self) -> usize {
        self.epochs.len()
    }

    pub fn horizon(&self) -> usize {
        self.epochs.iter().map(|e| e.len).sum()
    }

    /// First step index of each epoch.
    pub fn epoch_starts(&self) -> Vec<usize> {
        let mut starts = Vec::with_capacity(self.epochs.len());
        let mut t = 0;
        for e in &self.epochs {
            starts.push(t);
            t += e.len;
        }
        starts
    }

    /// Step size used at step t (the last epoch's for t past the horizon).
    pub fn gamma_at(&self, t: usize) -> f64 {
        let mut end = 0;
        for e in &self.epochs {
            end += e.len;
            if t < end {
                return e.gamma;
            }
        }
        self.epochs.last().map_or(self.gamma0, |e| e.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs.is_empty() {
            return Err(Error::param("schedule has no epochs"));
        }
        if self.epochs.iter().any(|e| !(e.gamma > 0.0 && e.gamma.is_finite())) {
            return Err(Error::param("schedule step sizes must be positive"));
        }
        Ok(())
    }
}

/// Source of θ*_0, θ*_1, ... for a run.
pub trait PathSource {
    fn current(&self) -> &Vector;
    fn advance(&mut self) -> Result<&Vector>;
    fn horizon(&self) -> usize;
}

impl PathSource for DriftWalker {
    fn current(&self) -> &Vector {
        DriftWalker::current(self)
    }

    fn advance(&mut self) -> Result<&Vector> {
        DriftWalker::advance(self)
    }

    fn horizon(&self) -> usize {
        DriftWalker::horizon(self)
    }
}

/// Cursor over a materialized path.
pub struct PathCursor<'a> {
    path: &'a MinimizerPath,
    t: usize,
}

impl<'a> PathCursor<'a> {
    pub fn new(path: &'a MinimizerPath) -> Self {
        PathCursor { path, t: 0 }
    }
}

impl PathSource for PathCursor<'_> {
    fn current(&self) -> &Vector {
        &self.path.points[self.t]
    }

    fn advance(&mut self) -> Result<&Vector> {
        if self.t >= self.path.horizon() {
            return Err(Error::param("drift path exhausted"));
        }
        self.t += 1;
        Ok(&self.path.points[self.t])
    }

    fn horizon(&self) -> usize {
        self.path.horizon()
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub run_id: String,
    pub config_digest: String,
    /// Record every k-th step; t = 0 and the final step are always recorded.
    pub record_every: usize,
    pub divergence_threshold: f64,
    /// Start here instead of θ*_0.
    pub theta0: Option<Vector>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            run_id: "run".into(),
            config_digest: String::new(),
            record_every: 1,
            divergence_threshold: DIVERGENCE_THRESHOLD,
            theta0: None,
        }
    }
}

/// A finished run and the steps at which the momentum buffer was reset.
#[derive(Clone, Debug)]
pub struct TrackingOutcome {
    pub record: RunRecord,
    pub restarts: Vec<usize>,
}

/// Runs an optimizer along a drifting minimizer path.
///
/// Step t queries the oracle for G_{t+1}, i.e. against θ*_{t+1}, and row t+1
/// records e_{t+1} = ‖θ_{t+1} − θ*_{t+1}‖² (prediction space for the MLP)
/// together with the loss the oracle reported at that step. Row 0 records e_0
/// and the loss of one extra oracle call at θ_0 against θ*_0. A run whose
/// error exceeds the threshold or turns non-finite ends with an `inf` row.
pub fn run_tracking(
    spec: &ProblemSpec,
    path: &mut dyn PathSource,
    optimizer: &Optimizer,
    sched: &Schedule,
    stream: &mut SeededStream,
    eval: &EvalContext,
    opts: &RunOptions,
) -> Result<TrackingOutcome> {
    spec.validate()?;
    sched.validate()?;
    if let Optimizer::Momentum(c) = optimizer {
        c.validate()?;
    }
    let horizon = sched.horizon();
    if path.horizon() < horizon {
        return Err(Error::param(format!(
            "path horizon {} shorter than schedule horizon {horizon}",
            path.horizon()
        )));
    }
    let every = opts.record_every.max(1);
    let mut record = RunRecord::new(opts.run_id.clone(), stream.seed(), opts.config_digest.clone());
    let theta0 = match &opts.theta0 {
        Some(t) => t.clone(),
        None => path.current().clone(),
    };
    let mut state = OptimizerState::new(theta0);
    let param_space = !matches!(spec.task, crate::problems::Task::Mlp { .. });

    let first = stochastic_gradient(spec, &state.theta, path.current(), stream)?;
    record.steps.push(StepRecord {
        t: 0,
        tracking_error_sq: eval.tracking_error(spec, &state.theta, path.current())?,
        loss: first.loss,
        metric: eval.metric(spec, &state.theta, path.current())?,
    });

    let starts = sched.epoch_starts();
    let mut restarts = Vec::new();
    let mut epoch = 0;
    for t in 0..horizon {
        while epoch + 1 < starts.len() && starts[epoch + 1] <= t {
            epoch += 1;
            if sched.restart {
                state.restart();
                restarts.push(t);
            }
        }
        let gamma = sched.epochs[epoch].gamma;
        let target = path.advance()?.clone();
        let step = match optimizer {
            Optimizer::Sgd => stochastic_gradient(spec, &state.theta, &target, stream).and_then(|s| {
                state.sgd_in_place(&s.grad, gamma)?;
                Ok(s)
            }),
            Optimizer::Momentum(cfg) => state.momentum_in_place(cfg, gamma, |psi| {
                stochastic_gradient(spec, psi, &target, stream)
            }),
        };
        let sample = match step {
            Ok(s) => s,
            Err(Error::Aborted { .. }) => {
                push_diverged(&mut record, t + 1);
                break;
            }
            Err(e) => return Err(e),
        };
        let n = t + 1;
        let param_err = if param_space {
            state.theta.dist_sq(&target)?
        } else {
            0.0
        };
        if !(param_err <= opts.divergence_threshold) {
            push_diverged(&mut record, n);
            break;
        }
        if n % every == 0 || n == horizon {
            let err = if param_space {
                param_err
            } else {
                eval.tracking_error(spec, &state.theta, &target)?
            };
            if !(err <= opts.divergence_threshold) || !sample.loss.is_finite() {
                push_diverged(&mut record, n);
                break;
            }
            record.steps.push(StepRecord {
                t: n,
                tracking_error_sq: err,
                loss: sample.loss,
                metric: eval.metric(spec, &state.theta, &target)?,
            });
        }
    }
    Ok(TrackingOutcome { record, restarts })
}

fn push_diverged(record: &mut RunRecord, t: usize) {
    record.steps.push(StepRecord {
        t,
        tracking_error_sq: f64::INFINITY,
        loss: f64::INFINITY,
        metric: None,
    });
}
