//! Drifting objectives: quadratic, linear and logistic regression, a
//! teacher–student MLP and the bump loss, each with a stochastic gradient
//! oracle evaluated against the current minimizer θ*.

pub mod mlp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardinstance::BumpLoss;
use crate::rng::SeededStream;
use crate::vector::{dot, Vector};

pub use mlp::{param_count, MlpParams};

pub const DEFAULT_BATCH: usize = 256;
pub const DEFAULT_LOGREG_REG: f64 = 1e-3;
pub const MLP_INIT_VARIANCE: f64 = 0.04;
pub const DEFAULT_VALIDATION_SIZE: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Task {
    /// ½(θ−θ*)ᵀH(θ−θ*) with diagonal H and additive N(0, σ²I) gradient noise.
    Quadratic,
    Linreg,
    Logreg,
    Mlp { d_in: usize, hidden: usize },
    /// Bump loss g_u; the sign u is read off θ*₁.
    Bump { a: f64, r: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(flatten)]
    pub task: Task,
    /// Parameter dimension.
    pub d: usize,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub kappa: f64,
    pub sigma2: f64,
    pub batch: usize,
    pub reg: f64,
    /// Covariate covariance eigenvalues (regression tasks and MLP inputs).
    pub covariance_eigs: Vec<f64>,
    /// Hessian diagonal (quadratic task).
    pub hessian_diag: Vec<f64>,
}

/// `n` values log-spaced between 1 and `kappa`.
pub fn log_spaced(n: usize, kappa: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| kappa.powf(i as f64 / (n - 1) as f64))
        .collect()
}

impl ProblemSpec {
    /// Isotropic quadratic with curvature μ.
    pub fn quadratic(d: usize, mu: f64, sigma2: f64) -> Self {
        Self::quadratic_diag(vec![mu; d], sigma2)
    }

    /// Quadratic with Hessian diag(eigs); μ and L are the extreme eigenvalues.
    pub fn quadratic_diag(eigs: Vec<f64>, sigma2: f64) -> Self {
        let mu = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let l = eigs.iter().cloned().fold(0.0, f64::max);
        ProblemSpec {
            task: Task::Quadratic,
            d: eigs.len(),
            mu,
            l,
            kappa: l / mu,
            sigma2,
            batch: 1,
            reg: 0.0,
            covariance_eigs: Vec::new(),
            hessian_diag: eigs,
        }
    }

    pub fn linreg(d: usize, kappa: f64, sigma2: f64, batch: usize) -> Self {
        ProblemSpec {
            task: Task::Linreg,
            d,
            mu: 1.0,
            l: kappa,
            kappa,
            sigma2,
            batch,
            reg: 0.0,
            covariance_eigs: log_spaced(d, kappa),
            hessian_diag: Vec::new(),
        }
    }

    /// μ is the ridge coefficient and L = λ_max(Σ)/4 + reg.
    pub fn logreg(d: usize, kappa: f64, reg: f64, batch: usize) -> Self {
        let l = 0.25 * kappa + reg;
        ProblemSpec {
            task: Task::Logreg,
            d,
            mu: reg,
            l,
            kappa: l / reg,
            sigma2: 0.0,
            batch,
            reg,
            covariance_eigs: log_spaced(d, kappa),
            hessian_diag: Vec::new(),
        }
    }

    /// Teacher–student network. μ and L are nominal (input covariance range);
    /// the loss is not convex in the weights.
    pub fn mlp(d_in: usize, hidden: usize, kappa: f64, sigma2: f64, batch: usize) -> Self {
        ProblemSpec {
            task: Task::Mlp { d_in, hidden },
            d: param_count(d_in, hidden),
            mu: 1.0,
            l: kappa,
            kappa,
            sigma2,
            batch,
            reg: 0.0,
            covariance_eigs: log_spaced(d_in, kappa),
            hessian_diag: Vec::new(),
        }
    }

    pub fn bump(d: usize, mu: f64, a: f64, r: f64, sigma2: f64) -> Self {
        ProblemSpec {
            task: Task::Bump { a, r },
            d,
            mu,
            l: 2.0 * mu,
            kappa: 2.0,
            sigma2,
            batch: 1,
            reg: 0.0,
            covariance_eigs: Vec::new(),
            hessian_diag: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::param("dimension must be positive"));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(Error::param("sigma2 must be >= 0"));
        }
        if self.batch == 0 {
            return Err(Error::param("batch must be positive"));
        }
        match &self.task {
            Task::Quadratic => {
                if self.hessian_diag.len() != self.d
                    || self.hessian_diag.iter().any(|&h| !(h > 0.0))
                {
                    return Err(Error::param("quadratic needs d positive Hessian entries"));
                }
            }
            Task::Linreg | Task::Logreg => {
                if self.covariance_eigs.len() != self.d {
                    return Err(Error::param("covariance_eigs must have length d"));
                }
                if matches!(self.task, Task::Logreg) && !(self.reg > 0.0) {
                    return Err(Error::param("logreg needs reg > 0"));
                }
            }
            Task::Mlp { d_in, hidden } => {
                if self.d != param_count(*d_in, *hidden) || self.covariance_eigs.len() != *d_in {
                    return Err(Error::param("inconsistent MLP dimensions"));
                }
            }
            Task::Bump { .. } => {
                self.bump_loss(1.0)?;
            }
        }
        Ok(())
    }

    fn bump_loss(&self, u: f64) -> Result<BumpLoss> {
        match self.task {
            Task::Bump { a, r } => BumpLoss::localized(self.mu, a, r, u, self.d),
            _ => Err(Error::Unsupported("not a bump task".into())),
        }
    }

    fn check(&self, theta: &Vector, theta_star: &Vector) -> Result<()> {
        for v in [theta, theta_star] {
            if v.dim() != self.d {
                return Err(Error::Dimension {
                    expected: self.d,
                    got: v.dim(),
                });
            }
        }
        Ok(())
    }

    /// Covariate draw x = Σ^{1/2} z with diagonal Σ.
    fn draw_covariates(&self, n: usize, stream: &mut SeededStream) -> Vec<f64> {
        let p = self.covariance_eigs.len();
        let sqrt_eigs: Vec<f64> = self.covariance_eigs.iter().map(|e| e.sqrt()).collect();
        let mut xs = vec![0.0; n * p];
        stream.fill_gaussian(&mut xs, 1.0);
        for row in xs.chunks_exact_mut(p) {
            for (x, s) in row.iter_mut().zip(&sqrt_eigs) {
                *x *= s;
            }
        }
        xs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradSample {
    pub grad: Vector,
    pub loss: f64,
}

/// One draw of the data behind a stochastic gradient.
#[derive(Clone, Debug)]
pub enum Batch {
    /// Additive gradient noise ξ.
    Noise(Vec<f64>),
    /// Covariates (row-major) and responses.
    Samples { xs: Vec<f64>, ys: Vec<f64> },
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn bump_sign(theta_star: &Vector) -> f64 {
    if theta_star[0] < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Draws the data for one gradient evaluation at the environment θ*.
pub fn sample_batch(
    spec: &ProblemSpec,
    theta_star: &Vector,
    stream: &mut SeededStream,
) -> Result<Batch> {
    if theta_star.dim() != spec.d {
        return Err(Error::Dimension {
            expected: spec.d,
            got: theta_star.dim(),
        });
    }
    let b = spec.batch;
    Ok(match &spec.task {
        Task::Quadratic | Task::Bump { .. } => {
            let mut xi = vec![0.0; spec.d];
            if spec.sigma2 > 0.0 {
                stream.fill_gaussian(&mut xi, spec.sigma2);
            }
            Batch::Noise(xi)
        }
        Task::Linreg => {
            let xs = spec.draw_covariates(b, stream);
            let mut noise = vec![0.0; b];
            stream.fill_gaussian(&mut noise, spec.sigma2);
            let ys = xs
                .chunks_exact(spec.d)
                .zip(noise)
                .map(|(x, e)| dot(x, theta_star.as_slice()) + e)
                .collect();
            Batch::Samples { xs, ys }
        }
        Task::Logreg => {
            let xs = spec.draw_covariates(b, stream);
            let ys = xs
                .chunks_exact(spec.d)
                .map(|x| {
                    let p = sigmoid(dot(x, theta_star.as_slice()));
                    if stream.uniform() < p {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            Batch::Samples { xs, ys }
        }
        Task::Mlp { d_in, hidden } => {
            let teacher = mlp::MlpView::new(*d_in, *hidden, theta_star.as_slice())?;
            let xs = spec.draw_covariates(b, stream);
            let mut noise = vec![0.0; b];
            stream.fill_gaussian(&mut noise, spec.sigma2);
            let ys = xs
                .chunks_exact(*d_in)
                .zip(noise)
                .map(|(x, e)| teacher.forward(x) + e)
                .collect();
            Batch::Samples { xs, ys }
        }
    })
}

/// The sample objective whose gradient is the stochastic gradient returned by
/// [`evaluate`]. For additive-noise tasks it includes the linear term ⟨ξ, θ−θ*⟩.
pub fn sample_objective(
    spec: &ProblemSpec,
    batch: &Batch,
    theta: &Vector,
    theta_star: &Vector,
) -> Result<f64> {
    spec.check(theta, theta_star)?;
    let th = theta.as_slice();
    let ts = theta_star.as_slice();
    Ok(match (&spec.task, batch) {
        (Task::Quadratic, Batch::Noise(xi)) => {
            let mut v = 0.0;
            for i in 0..spec.d {
                let e = th[i] - ts[i];
                v += 0.5 * spec.hessian_diag[i] * e * e + xi[i] * e;
            }
            v
        }
        (Task::Bump { .. }, Batch::Noise(xi)) => {
            let loss = spec.bump_loss(bump_sign(theta_star))?;
            loss.value(th) + dot(xi, th)
        }
        (Task::Linreg, Batch::Samples { xs, ys }) => {
            let n = ys.len() as f64;
            xs.chunks_exact(spec.d)
                .zip(ys)
                .map(|(x, y)| {
                    let r = dot(x, th) - y;
                    0.5 * r * r
                })
                .sum::<f64>()
                / n
        }
        (Task::Logreg, Batch::Samples { xs, ys }) => {
            let n = ys.len() as f64;
            let data: f64 = xs
                .chunks_exact(spec.d)
                .zip(ys)
                .map(|(x, y)| {
                    let z = dot(x, th);
                    softplus(z) - y * z
                })
                .sum::<f64>()
                / n;
            data + 0.5 * spec.reg * dot(th, th)
        }
        (Task::Mlp { d_in, hidden }, Batch::Samples { xs, ys }) => {
            mlp::MlpView::new(*d_in, *hidden, th)?.loss(xs, ys)
        }
        _ => return Err(Error::param("batch does not match task")),
    })
}

/// Stochastic gradient and loss at θ for a drawn batch. The reported loss is
/// ½(θ−θ*)ᵀH(θ−θ*) for the quadratic, g_u(θ) for the bump, and the mini-batch
/// objective otherwise.
pub fn evaluate(
    spec: &ProblemSpec,
    batch: &Batch,
    theta: &Vector,
    theta_star: &Vector,
) -> Result<GradSample> {
    spec.check(theta, theta_star)?;
    let th = theta.as_slice();
    let ts = theta_star.as_slice();
    let d = spec.d;
    let (grad, loss) = match (&spec.task, batch) {
        (Task::Quadratic, Batch::Noise(xi)) => {
            let mut g = vec![0.0; d];
            let mut loss = 0.0;
            for i in 0..d {
                let e = th[i] - ts[i];
                let he = spec.hessian_diag[i] * e;
                g[i] = he + xi[i];
                loss += 0.5 * he * e;
            }
            (g, loss)
        }
        (Task::Bump { .. }, Batch::Noise(xi)) => {
            let bump = spec.bump_loss(bump_sign(theta_star))?;
            let (v, mut g) = bump.value_and_gradient_slice(th);
            for (gi, x) in g.iter_mut().zip(xi) {
                *gi += x;
            }
            (g, v)
        }
        (Task::Linreg, Batch::Samples { xs, ys }) => {
            let n = ys.len() as f64;
            let mut g = vec![0.0; d];
            let mut loss = 0.0;
            for (x, y) in xs.chunks_exact(d).zip(ys) {
                let r = dot(x, th) - y;
                loss += 0.5 * r * r / n;
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += r * xi / n;
                }
            }
            (g, loss)
        }
        (Task::Logreg, Batch::Samples { xs, ys }) => {
            let n = ys.len() as f64;
            let mut g: Vec<f64> = th.iter().map(|t| spec.reg * t).collect();
            let mut loss = 0.5 * spec.reg * dot(th, th);
            for (x, y) in xs.chunks_exact(d).zip(ys) {
                let z = dot(x, th);
                loss += (softplus(z) - y * z) / n;
                let r = sigmoid(z) - y;
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += r * xi / n;
                }
            }
            (g, loss)
        }
        (Task::Mlp { d_in, hidden }, Batch::Samples { xs, ys }) => {
            let (loss, g) = mlp::MlpView::new(*d_in, *hidden, th)?.loss_and_grad(xs, ys);
            (g, loss)
        }
        _ => return Err(Error::param("batch does not match task")),
    };
    Ok(GradSample {
        grad: Vector::from_raw(grad),
        loss,
    })
}

pub fn stochastic_gradient(
    spec: &ProblemSpec,
    theta: &Vector,
    theta_star: &Vector,
    stream: &mut SeededStream,
) -> Result<GradSample> {
    spec.check(theta, theta_star)?;
    let batch = sample_batch(spec, theta_star, stream)?;
    evaluate(spec, &batch, theta, theta_star)
}

/// Mean gradient m(θ) where it has a closed form.
pub fn population_gradient(spec: &ProblemSpec, theta: &Vector, theta_star: &Vector) -> Result<Vector> {
    spec.check(theta, theta_star)?;
    let e = theta.sub(theta_star)?;
    match &spec.task {
        Task::Quadratic => Ok(Vector::from_raw(
            e.as_slice()
                .iter()
                .zip(&spec.hessian_diag)
                .map(|(x, h)| h * x)
                .collect(),
        )),
        Task::Linreg => Ok(Vector::from_raw(
            e.as_slice()
                .iter()
                .zip(&spec.covariance_eigs)
                .map(|(x, l)| l * x)
                .collect(),
        )),
        Task::Bump { .. } => {
            let bump = spec.bump_loss(bump_sign(theta_star))?;
            Ok(Vector::from_raw(bump.value_and_gradient_slice(theta.as_slice()).1))
        }
        Task::Logreg | Task::Mlp { .. } => Err(Error::Unsupported(
            "population gradient has no closed form for this task".into(),
        )),
    }
}

/// Mean squared prediction difference between student and teacher over a
/// fixed set of inputs (row-major, n × d_in).
pub fn prediction_tracking_error(
    spec: &ProblemSpec,
    student: &MlpParams,
    teacher: &MlpParams,
    validation: &[f64],
) -> Result<f64> {
    let Task::Mlp { d_in, hidden } = spec.task else {
        return Err(Error::Unsupported("prediction tracking needs an mlp task".into()));
    };
    mlp::prediction_gap(d_in, hidden, &student.flatten(), &teacher.flatten(), validation)
}

/// Initial minimizer θ*₀ for a task: 0 for the quadratic, +a·e₁ for the bump,
/// N(0, I/d) for regression and N(0, 0.04) weights for the MLP teacher.
pub fn initial_minimizer(spec: &ProblemSpec, stream: &mut SeededStream) -> Result<Vector> {
    spec.validate()?;
    let mut v = vec![0.0; spec.d];
    match &spec.task {
        Task::Quadratic => {}
        Task::Bump { a, .. } => v[0] = *a,
        Task::Linreg | Task::Logreg => stream.fill_gaussian(&mut v, 1.0 / spec.d as f64),
        Task::Mlp { .. } => stream.fill_gaussian(&mut v, MLP_INIT_VARIANCE),
    }
    Ok(Vector::from_raw(v))
}

/// Per-run fixed evaluation data: the MLP validation set with its label noise,
/// or the logistic-regression held-out covariates.
#[derive(Clone, Debug, Default)]
pub struct EvalContext {
    inputs: Vec<f64>,
    label_noise: Vec<f64>,
}

impl EvalContext {
    pub fn new(spec: &ProblemSpec, n: usize, stream: &mut SeededStream) -> Result<Self> {
        Ok(match spec.task {
            Task::Mlp { .. } | Task::Logreg => {
                if n == 0 {
                    return Err(Error::param("validation set is empty"));
                }
                let inputs = spec.draw_covariates(n, stream);
                let mut label_noise = vec![0.0; n];
                if matches!(spec.task, Task::Mlp { .. }) {
                    stream.fill_gaussian(&mut label_noise, spec.sigma2);
                }
                EvalContext {
                    inputs,
                    label_noise,
                }
            }
            _ => EvalContext::default(),
        })
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    /// Squared tracking error: parameter space, or prediction space for the MLP.
    pub fn tracking_error(&self, spec: &ProblemSpec, theta: &Vector, theta_star: &Vector) -> Result<f64> {
        match spec.task {
            Task::Mlp { d_in, hidden } => mlp::prediction_gap(
                d_in,
                hidden,
                theta.as_slice(),
                theta_star.as_slice(),
                &self.inputs,
            ),
            _ => theta.dist_sq(theta_star),
        }
    }

    /// Expected held-out accuracy (logreg) or validation MSE against noisy
    /// teacher labels (MLP); `None` for other tasks.
    pub fn metric(&self, spec: &ProblemSpec, theta: &Vector, theta_star: &Vector) -> Result<Option<f64>> {
        match spec.task {
            Task::Logreg => {
                let n = self.inputs.len() / spec.d;
                let acc: f64 = self
                    .inputs
                    .chunks_exact(spec.d)
                    .map(|x| {
                        let p = sigmoid(dot(x, theta_star.as_slice()));
                        if dot(x, theta.as_slice()) > 0.0 {
                            p
                        } else {
                            1.0 - p
                        }
                    })
                    .sum();
                Ok(Some(acc / n as f64))
            }
            Task::Mlp { d_in, hidden } => {
                let s = mlp::MlpView::new(d_in, hidden, theta.as_slice())?;
                let t = mlp::MlpView::new(d_in, hidden, theta_star.as_slice())?;
                let n = self.label_noise.len();
                let mse: f64 = self
                    .inputs
                    .chunks_exact(d_in)
                    .zip(&self.label_noise)
                    .map(|(x, e)| {
                        let r = s.forward(x) - t.forward(x) - e;
                        r * r
                    })
                    .sum();
                Ok(Some(mse / n as f64))
            }
            _ => Ok(None),
        }
    }
}
