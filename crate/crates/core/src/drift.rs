//! Minimizer paths θ*_0..θ*_T and their drift increments.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rand_distr::StudentT;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededStream;
use crate::vector::Vector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    /// Steps along i.i.d. Gaussian directions, rescaled to norm `delta_rw`.
    GaussianWalk,
    /// Steps with i.i.d. Student-t coordinates. When `normalize_steps` is set
    /// each step has norm exactly `delta_rw`; otherwise it is scaled so that
    /// E‖step‖² = delta_rw².
    StudentTWalk {
        #[serde(default = "default_nu")]
        nu: f64,
        #[serde(default = "default_true")]
        normalize_steps: bool,
    },
    /// θ*_t alternates between +a·axis and −a·axis over `j` consecutive blocks.
    BlockSwitch { j: usize, a: f64, axis: Vector },
    /// Constant-velocity drift: one Gaussian direction drawn up front, every
    /// step moves `delta_rw` along it.
    Directed,
}

fn default_nu() -> f64 {
    3.0
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftProcess {
    #[serde(flatten)]
    pub kind: DriftKind,
    #[serde(default)]
    pub delta_rw: f64,
}

impl DriftProcess {
    pub fn gaussian_walk(delta_rw: f64) -> Self {
        DriftProcess {
            kind: DriftKind::GaussianWalk,
            delta_rw,
        }
    }

    pub fn student_t_walk(delta_rw: f64, nu: f64) -> Self {
        DriftProcess {
            kind: DriftKind::StudentTWalk {
                nu,
                normalize_steps: true,
            },
            delta_rw,
        }
    }

    pub fn directed(delta_rw: f64) -> Self {
        DriftProcess {
            kind: DriftKind::Directed,
            delta_rw,
        }
    }

    pub fn block_switch(j: usize, a: f64, axis: Vector) -> Self {
        DriftProcess {
            kind: DriftKind::BlockSwitch { j, a, axis },
            delta_rw: 0.0,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.delta_rw >= 0.0) || !self.delta_rw.is_finite() {
            return Err(Error::param(format!("delta_rw must be >= 0, got {}", self.delta_rw)));
        }
        match &self.kind {
            DriftKind::StudentTWalk { nu, .. } if !(*nu > 2.0) => Err(Error::param(format!(
                "Student-t degrees of freedom must exceed 2, got {nu}"
            ))),
            DriftKind::BlockSwitch { j, a, axis } => {
                if *j == 0 {
                    return Err(Error::param("block count must be positive"));
                }
                if !(*a > 0.0) {
                    return Err(Error::param("block amplitude must be positive"));
                }
                if axis.dim() != d {
                    return Err(Error::Dimension {
                        expected: d,
                        got: axis.dim(),
                    });
                }
                if (axis.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::param("block axis must be a unit vector"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Splits `0..t_len` into `j` consecutive blocks of length ⌊t_len/j⌋ or one
/// more; the longer blocks come first.
pub fn block_partition(t_len: usize, j: usize) -> Result<Vec<Range<usize>>> {
    if j == 0 || j > t_len {
        return Err(Error::param(format!(
            "need 1 <= J <= T, got J={j}, T={t_len}"
        )));
    }
    let base = t_len / j;
    let extra = t_len % j;
    let mut start = 0;
    Ok((0..j)
        .map(|b| {
            let len = base + usize::from(b < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// θ*_0..θ*_T.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimizerPath {
    pub points: Vec<Vector>,
}

impl MinimizerPath {
    pub fn horizon(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vector::dim)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..self.dim()).map(|i| format!("coord_{i}")))
            .collect();
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        for (t, p) in self.points.iter().enumerate() {
            write!(w, "{t}").map_err(io)?;
            for x in p.as_slice() {
                write!(w, ",{x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Produces a path one point at a time, so long paths in high dimension need
/// not be materialized. Yields exactly the points of [`generate_path`].
pub struct DriftWalker {
    process: DriftProcess,
    current: Vector,
    t: usize,
    horizon: usize,
    stream: SeededStream,
    direction: Option<Vec<f64>>,
    blocks: Vec<Range<usize>>,
    student: Option<StudentT<f64>>,
}

impl DriftWalker {
    pub fn new(
        process: &DriftProcess,
        theta0: &Vector,
        horizon: usize,
        stream: SeededStream,
    ) -> Result<Self> {
        process.validate(theta0.dim())?;
        let mut blocks = Vec::new();
        let mut current = theta0.clone();
        if let DriftKind::BlockSwitch { j, a, axis } = &process.kind {
            blocks = block_partition(horizon.max(*j), *j)?;
            current = axis.scale(*a);
        }
        let student = match process.kind {
            DriftKind::StudentTWalk { nu, .. } => Some(
                StudentT::new(nu).map_err(|e| Error::param(format!("Student-t: {e}")))?,
            ),
            _ => None,
        };
        Ok(DriftWalker {
            process: process.clone(),
            current,
            t: 0,
            horizon,
            stream,
            direction: None,
            blocks,
            student,
        })
    }

    pub fn current(&self) -> &Vector {
        &self.current
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn unit_gaussian(&mut self, d: usize) -> Vec<f64> {
        loop {
            let mut u = vec![0.0; d];
            self.stream.fill_gaussian(&mut u, 1.0);
            let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                u.iter_mut().for_each(|x| *x /= n);
                return u;
            }
        }
    }

    fn block_sign(&self, t: usize) -> f64 {
        let b = self
            .blocks
            .iter()
            .position(|r| r.contains(&t))
            .unwrap_or(self.blocks.len() - 1);
        if b % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Moves to θ*_{t+1}; fails past the horizon.
    pub fn advance(&mut self) -> Result<&Vector> {
        if self.t >= self.horizon {
            return Err(Error::param("drift path exhausted"));
        }
        let d = self.current.dim();
        let delta = self.process.delta_rw;
        match &self.process.kind {
            DriftKind::BlockSwitch { a, axis, .. } => {
                let s = self.block_sign(self.t + 1);
                self.current = axis.scale(s * a);
            }
            _ if delta == 0.0 => {}
            DriftKind::GaussianWalk => {
                let u = self.unit_gaussian(d);
                step(&mut self.current, delta, &u);
            }
            DriftKind::Directed => {
                if self.direction.is_none() {
                    self.direction = Some(self.unit_gaussian(d));
                }
                let u = self.direction.as_ref().expect("direction drawn");
                step(&mut self.current, delta, u);
            }
            DriftKind::StudentTWalk {
                nu,
                normalize_steps,
            } => {
                let dist = self.student.as_ref().expect("Student-t built");
                let (u, scale) = loop {
                    let u: Vec<f64> = (0..d).map(|_| self.stream.sample(dist)).collect();
                    let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if *normalize_steps {
                        if n > 0.0 && n.is_finite() {
                            break (u, 1.0 / n);
                        }
                    } else {
                        break (u, 1.0 / (d as f64 * nu / (nu - 2.0)).sqrt());
                    }
                };
                for (c, ui) in self.current.as_mut_slice().iter_mut().zip(&u) {
                    *c += delta * scale * ui;
                }
            }
        }
        self.t += 1;
        Ok(&self.current)
    }
}

fn step(current: &mut Vector, delta: f64, u: &[f64]) {
    for (c, ui) in current.as_mut_slice().iter_mut().zip(u) {
        *c += delta * ui;
    }
}

/// Generates θ*_0..θ*_T. For block switching, θ*_t = ±a·axis and `theta0`
/// only fixes the dimension.
pub fn generate_path(
    process: &DriftProcess,
    theta0: &Vector,
    horizon: usize,
    stream: SeededStream,
) -> Result<MinimizerPath> {
    let mut walker = DriftWalker::new(process, theta0, horizon, stream)?;
    let mut points = Vec::with_capacity(horizon + 1);
    points.push(walker.current().clone());
    for _ in 0..horizon {
        points.push(walker.advance()?.clone());
    }
    Ok(MinimizerPath { points })
}

/// ‖Δ_t‖² = ‖θ*_t − θ*_{t+1}‖² for t = 0..T−1.
pub fn drift_increments(path: &MinimizerPath) -> Vec<f64> {
    path.points
        .windows(2)
        .map(|w| crate::vector::dist_sq(w[0].as_slice(), w[1].as_slice()))
        .collect()
}
