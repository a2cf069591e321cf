//! Config-driven experiments: grid expansion, seeded parallel execution with
//! resume, aggregation and table rendering.
//!
//! A config file is a JSON object. Any grid field may hold a list, and the
//! grid is the cartesian product in the order of [`GRID_FIELDS`] with the
//! first field varying slowest. A JSON array of such objects concatenates
//! their grids.

mod execute;
mod report;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::bounds::{momentum_step_decay_schedule, sgd_step_decay_schedule, RegimeParams};
use crate::drift::{DriftProcess, DriftWalker};
use crate::error::{Error, Result};
use crate::optim::{run_tracking, MomentumConfig, Optimizer, RunOptions, Schedule, ScheduleKind};
use crate::problems::{initial_minimizer, log_spaced, EvalContext, ProblemSpec};
use crate::record::RunRecord;
use crate::rng::{derive_seed, SeededStream};

pub use execute::{execute, runs_path, ExecuteReport, LEDGER_FILE};
pub use report::{
    aggregate, aggregate_records, load_configs, plotdata, render_table, write_aggregate, AggregateCell,
    RenderedTable, TableFormat, TableId, AGGREGATE_HEADER, TRAILING_WINDOW,
};

/// Fields that may be lists, slowest-varying first.
pub const GRID_FIELDS: [&str; 17] = [
    "task",
    "d",
    "kappa",
    "sigma2",
    "method",
    "beta",
    "gamma",
    "schedule",
    "T",
    "batch",
    "drift",
    "mu",
    "reg",
    "hidden",
    "a",
    "r",
    "record_every",
];

/// Fields that must be scalars.
pub const SCALAR_FIELDS: [&str; 5] = ["name", "seeds", "out_dir", "master_seed", "eval_size"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Quadratic,
    Linreg,
    Logreg,
    Mlp,
    Bump,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sgd,
    Hb,
    Nag,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Sgd => "SGD",
            Method::Hb => "HB",
            Method::Nag => "NAG",
        }
    }

    pub fn optimizer(&self, beta: f64) -> Optimizer {
        match self {
            Method::Sgd => Optimizer::Sgd,
            Method::Hb => Optimizer::Momentum(MomentumConfig::heavy_ball(beta)),
            Method::Nag => Optimizer::Momentum(MomentumConfig::nesterov(beta)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: TaskKind,
    /// Parameter dimension, or input dimension for the MLP.
    pub d: usize,
    pub kappa: f64,
    pub sigma2: f64,
    pub method: Method,
    pub beta: f64,
    pub gamma: f64,
    pub schedule: ScheduleKind,
    #[serde(rename = "T")]
    pub t_len: usize,
    pub batch: usize,
    pub drift: DriftProcess,
    pub mu: f64,
    pub reg: f64,
    pub hidden: usize,
    pub a: f64,
    pub r: f64,
    pub record_every: usize,
    pub seeds: usize,
    pub master_seed: u64,
    pub eval_size: usize,
    /// Position in the expanded grid; keys the noise streams.
    pub config_index: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            task: TaskKind::Quadratic,
            d: 100,
            kappa: 1.0,
            sigma2: 0.1,
            method: Method::Sgd,
            beta: 0.0,
            gamma: 0.01,
            schedule: ScheduleKind::Constant,
            t_len: 5000,
            batch: crate::problems::DEFAULT_BATCH,
            drift: DriftProcess::gaussian_walk(0.01),
            mu: 1.0,
            reg: crate::problems::DEFAULT_LOGREG_REG,
            hidden: 128,
            a: 0.05,
            r: 1.0,
            record_every: 1,
            seeds: 20,
            master_seed: 0,
            eval_size: crate::problems::DEFAULT_VALIDATION_SIZE,
            config_index: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// 16 hex digits of SHA-256 over the canonical JSON of the config
    /// (everything except `out_dir`).
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let hash = Sha256::digest(json.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let spec = match self.task {
            TaskKind::Quadratic => ProblemSpec::quadratic_diag(
                log_spaced(self.d, self.kappa).into_iter().map(|x| x * self.mu).collect(),
                self.sigma2,
            ),
            TaskKind::Linreg => ProblemSpec::linreg(self.d, self.kappa, self.sigma2, self.batch),
            TaskKind::Logreg => ProblemSpec::logreg(self.d, self.kappa, self.reg, self.batch),
            TaskKind::Mlp => ProblemSpec::mlp(self.d, self.hidden, self.kappa, self.sigma2, self.batch),
            TaskKind::Bump => ProblemSpec::bump(self.d, self.mu, self.a, self.r, self.sigma2),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn optimizer(&self) -> Optimizer {
        self.method.optimizer(self.beta)
    }

    /// The step-size schedule. Step-decay variants derive γ* from the
    /// closed-form floors with σ² = d·sigma2 (total gradient noise),
    /// Δ = delta_rw and the run's initial error. A decay schedule shorter than
    /// T keeps its last step size until T.
    pub fn schedule(&self, spec: &ProblemSpec, e0_sq: f64) -> Result<Schedule> {
        match self.schedule {
            ScheduleKind::Constant => Schedule::constant(self.gamma, self.t_len),
            kind => {
                let beta = if kind == ScheduleKind::StepDecaySgd { 0.0 } else { self.beta };
                let p = RegimeParams::new(
                    spec.mu,
                    spec.l,
                    beta,
                    self.gamma,
                    (self.sigma2 * spec.d as f64).sqrt(),
                    self.drift.delta_rw,
                )?;
                let mut sched = if kind == ScheduleKind::StepDecaySgd {
                    sgd_step_decay_schedule(&p, e0_sq)?
                } else {
                    momentum_step_decay_schedule(&p, e0_sq)?
                };
                // the final epoch runs on until T
                let h = sched.horizon();
                if h < self.t_len {
                    sched.epochs.last_mut().expect("at least one epoch").len += self.t_len - h;
                }
                Ok(sched)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let schema = |field: &str, msg: &str| Error::Schema {
            field: field.into(),
            msg: msg.into(),
        };
        if self.d == 0 {
            return Err(schema("d", "must be >= 1"));
        }
        if !(self.kappa >= 1.0) {
            return Err(schema("kappa", "must be >= 1"));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(schema("sigma2", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(schema("beta", "must lie in [0, 1)"));
        }
        if !(self.gamma > 0.0) {
            return Err(schema("gamma", "must be positive"));
        }
        if self.t_len == 0 {
            return Err(schema("T", "must be >= 1"));
        }
        if self.batch == 0 {
            return Err(schema("batch", "must be >= 1"));
        }
        if self.seeds == 0 {
            return Err(schema("seeds", "must be >= 1"));
        }
        let spec = self.problem().map_err(|e| schema("task", &e.to_string()))?;
        self.drift.validate(spec.d).map_err(|e| schema("drift", &e.to_string()))?;
        Ok(())
    }

    /// Key of the shared per-seed streams (initial minimizer, drift path,
    /// evaluation data). Every config in a grid sees the same path for a seed.
    pub fn path_seed(&self, seed_idx: usize) -> u64 {
        derive_seed(self.master_seed, &[seed_idx as u64])
    }

    /// Key of the gradient-noise stream of (config, seed).
    pub fn noise_seed(&self, seed_idx: usize) -> u64 {
        derive_seed(self.master_seed, &[self.config_index as u64, seed_idx as u64])
    }

    /// Runs one seed.
    pub fn run_seed(&self, seed_idx: usize) -> Result<RunRecord> {
        let spec = self.problem()?;
        let base = self.path_seed(seed_idx);
        let theta0 = initial_minimizer(&spec, &mut SeededStream::new(base, 2))?;
        let sched = self.schedule(&spec, 0.0)?;
        let mut walker = DriftWalker::new(&self.drift, &theta0, sched.horizon(), SeededStream::new(base, 1))?;
        let eval = EvalContext::new(&spec, self.eval_size, &mut SeededStream::new(base, 3))?;
        let mut noise = SeededStream::new(self.noise_seed(seed_idx), 0);
        let digest = self.digest();
        let opts = RunOptions {
            run_id: format!("{digest}/{seed_idx}"),
            config_digest: digest,
            record_every: self.record_every,
            ..RunOptions::default()
        };
        Ok(run_tracking(&spec, &mut walker, &self.optimizer(), &sched, &mut noise, &eval, &opts)?.record)
    }
}

fn schema(field: &str, msg: impl Into<String>) -> Error {
    Error::Schema {
        field: field.into(),
        msg: msg.into(),
    }
}

fn as_f64(field: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| schema(field, format!("expected a number, got {v}")))
}

fn as_usize(field: &str, v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| schema(field, format!("expected a non-negative integer, got {v}")))
}

fn as_enum<T: serde::de::DeserializeOwned>(field: &str, v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| schema(field, format!("invalid value {v}: {e}")))
}

fn apply(cfg: &mut ExperimentConfig, field: &str, v: &Value) -> Result<()> {
    match field {
        "task" => cfg.task = as_enum(field, v)?,
        "d" => cfg.d = as_usize(field, v)?,
        "kappa" => cfg.kappa = as_f64(field, v)?,
        "sigma2" => cfg.sigma2 = as_f64(field, v)?,
        "method" => cfg.method = as_enum(field, v)?,
        "beta" => cfg.beta = as_f64(field, v)?,
        "gamma" => cfg.gamma = as_f64(field, v)?,
        "schedule" => cfg.schedule = as_enum(field, v)?,
        "T" => cfg.t_len = as_usize(field, v)?,
        "batch" => cfg.batch = as_usize(field, v)?,
        "drift" => cfg.drift = as_enum(field, v)?,
        "mu" => cfg.mu = as_f64(field, v)?,
        "reg" => cfg.reg = as_f64(field, v)?,
        "hidden" => cfg.hidden = as_usize(field, v)?,
        "a" => cfg.a = as_f64(field, v)?,
        "r" => cfg.r = as_f64(field, v)?,
        "record_every" => cfg.record_every = as_usize(field, v)?,
        "name" => {
            cfg.name = v
                .as_str()
                .ok_or_else(|| schema(field, "expected a string"))?
                .to_string()
        }
        "seeds" => cfg.seeds = as_usize(field, v)?,
        "out_dir" => {
            cfg.out_dir = PathBuf::from(v.as_str().ok_or_else(|| schema(field, "expected a string"))?)
        }
        "master_seed" => {
            cfg.master_seed = v
                .as_u64()
                .ok_or_else(|| schema(field, "expected a non-negative integer"))?
        }
        "eval_size" => cfg.eval_size = as_usize(field, v)?,
        _ => return Err(schema(field, "unknown field")),
    }
    Ok(())
}

/// Expands a parsed config into its grid. The root is a grid object or an
/// array of grid objects whose grids are concatenated.
pub fn expand_value(root: &Value) -> Result<Vec<ExperimentConfig>> {
    let mut grid = match root {
        Value::Array(parts) if !parts.is_empty() => {
            let mut all = Vec::new();
            for part in parts {
                all.extend(expand_object(part)?);
            }
            all
        }
        Value::Array(_) => return Err(schema("<root>", "empty config list")),
        obj => expand_object(obj)?,
    };
    for (i, cfg) in grid.iter_mut().enumerate() {
        cfg.config_index = i;
    }
    Ok(grid)
}

fn expand_object(root: &Value) -> Result<Vec<ExperimentConfig>> {
    let obj: &Map<String, Value> = root
        .as_object()
        .ok_or_else(|| schema("<root>", "config must be a JSON object or an array of objects"))?;
    for key in obj.keys() {
        if !GRID_FIELDS.contains(&key.as_str()) && !SCALAR_FIELDS.contains(&key.as_str()) {
            return Err(schema(key, "unknown field"));
        }
    }
    let mut base = ExperimentConfig::default();
    for field in SCALAR_FIELDS {
        if let Some(v) = obj.get(field) {
            apply(&mut base, field, v)?;
        }
    }
    let mut grid = vec![base];
    for field in GRID_FIELDS {
        let Some(v) = obj.get(field) else { continue };
        let values: Vec<&Value> = match v {
            Value::Array(items) => {
                if items.is_empty() {
                    return Err(schema(field, "empty list"));
                }
                items.iter().collect()
            }
            other => vec![other],
        };
        let mut next = Vec::with_capacity(grid.len() * values.len());
        for cfg in &grid {
            for value in &values {
                let mut c = cfg.clone();
                apply(&mut c, field, value)?;
                next.push(c);
            }
        }
        grid = next;
    }
    for cfg in &grid {
        cfg.validate()?;
    }
    Ok(grid)
}

/// Reads and expands a config file.
pub fn expand_grid(path: &std::path::Path) -> Result<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text)?;
    expand_value(&value)
}
