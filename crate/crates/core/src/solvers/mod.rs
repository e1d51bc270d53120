//! Randomized Kaczmarz iterations: B-MRK on matrix systems, TRK-L and TRK-LB on
//! t-product tensor systems.
//!
//! All three share one driver: sample a row (or block) with probability
//! proportional to its squared Frobenius norm, apply the projection step, and
//! log the residual every `log_stride` iterations. Iteration 0 and the final
//! iteration are always logged.

mod bmrk;
mod trkl;
mod trklb;

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ProblemError;
use crate::tensor::Tensor3;

pub use bmrk::{bmrk_solve, bmrk_solve_observed, bmrk_step, Bmrk};
pub use trkl::{trkl_solve, trkl_solve_observed, trkl_step, Trkl};
pub use trklb::{trklb_solve, trklb_solve_observed, trklb_step, Trklb};

/// The seedable generator used for every random draw in the crate.
pub type SolverRng = ChaCha8Rng;

/// Callback invoked at each log point with `(iteration, iterate, residual)`.
pub type Observer<'a> = dyn FnMut(usize, &Tensor3, f64) + 'a;

pub const DEFAULT_TRK_ALPHA: f64 = 1.8;
pub const DEFAULT_BMRK_STEP: f64 = 1.0;

/// How per-row (or per-block) step sizes are chosen.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum StepPolicy {
    /// `alpha = 1.8` for TRK-L/TRK-LB, `t = 1` for B-MRK.
    #[default]
    Default,
    /// TRK: `t_i = alpha * bound_i / 2`. B-MRK: `t = alpha` for every block.
    Coefficient(f64),
    /// The same explicit step for every row or block.
    Uniform(f64),
    /// One explicit step per row (TRK) or per block (B-MRK).
    Explicit(Vec<f64>),
}

impl fmt::Display for StepPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Default => write!(f, "default"),
            Self::Coefficient(a) => write!(f, "alpha={a}"),
            Self::Uniform(t) => write!(f, "uniform={t}"),
            Self::Explicit(v) => write!(f, "explicit[{}]", v.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the logged residual is at or below this value; 0 disables.
    pub residual_tol: f64,
    pub seed: u64,
    pub log_stride: usize,
    pub step: StepPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            residual_tol: 0.0,
            seed: 0,
            log_stride: 10,
            step: StepPolicy::Default,
        }
    }
}

impl SolverConfig {
    pub fn new(max_iters: usize, seed: u64) -> Self {
        Self {
            max_iters,
            seed,
            ..Self::default()
        }
    }

    pub fn with_step(mut self, step: StepPolicy) -> Self {
        self.step = step;
        self
    }

    pub fn with_log_stride(mut self, stride: usize) -> Self {
        self.log_stride = stride;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    fn validate(&self) -> Result<(), ProblemError> {
        if self.log_stride == 0 {
            return Err(ProblemError::Config("log_stride must be positive".into()));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(ProblemError::Config("residual_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub elapsed_seconds: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct TraceMeta {
    pub solver: String,
    /// `(m, l, p, n)`.
    pub dims: (usize, usize, usize, usize),
    pub seed: u64,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub log_stride: usize,
    pub step_policy: String,
    pub steps: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunTrace {
    pub meta: TraceMeta,
    pub points: Vec<TracePoint>,
}

impl RunTrace {
    pub fn initial_residual(&self) -> Option<f64> {
        self.points.first().map(|p| p.residual)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.points.last().map(|p| p.residual)
    }

    pub fn last_iteration(&self) -> usize {
        self.points.last().map_or(0, |p| p.iteration)
    }

    /// First logged iteration whose residual is at or below `target`.
    pub fn first_reaching(&self, target: f64) -> Option<usize> {
        self.points.iter().find(|p| p.residual <= target).map(|p| p.iteration)
    }
}

/// Cumulative distribution over rows or blocks, `p_i = w_i / sum(w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingWeights {
    cdf: Vec<f64>,
}

impl SamplingWeights {
    pub fn from_sq_norms(sq_norms: &[f64]) -> Result<Self, ProblemError> {
        if sq_norms.is_empty() {
            return Err(ProblemError::Config("no rows to sample".into()));
        }
        if let Some(row) = sq_norms.iter().position(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(ProblemError::ZeroRow { row });
        }
        let total: f64 = sq_norms.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = sq_norms
            .iter()
            .map(|&w| {
                acc += w;
                acc / total
            })
            .collect();
        *cdf.last_mut().expect("nonempty") = 1.0;
        Ok(Self { cdf })
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    pub fn probability(&self, i: usize) -> f64 {
        if i == 0 {
            self.cdf[0]
        } else {
            self.cdf[i] - self.cdf[i - 1]
        }
    }
}

/// Inverse-CDF draw from one uniform variate; advances `rng` by one `f64`.
pub fn sample_index(weights: &SamplingWeights, rng: &mut SolverRng) -> usize {
    let u: f64 = rng.random();
    weights.cdf.partition_point(|&c| c <= u).min(weights.cdf.len() - 1)
}

/// Solver-specific part of the shared iteration driver.
pub(crate) trait Kernel {
    type State;

    fn init(&mut self, x0: &Tensor3) -> Result<Self::State, ProblemError>;
    fn step(&mut self, state: &mut Self::State, index: usize) -> Result<(), ProblemError>;
    fn materialize(&mut self, state: &Self::State) -> Result<Tensor3, ProblemError>;
    fn residual(&mut self, x: &Tensor3) -> Result<f64, ProblemError>;
}

pub(crate) fn drive<K: Kernel>(
    kernel: &mut K,
    weights: &SamplingWeights,
    x0: &Tensor3,
    cfg: &SolverConfig,
    meta: TraceMeta,
    observer: &mut Observer<'_>,
) -> Result<(Tensor3, RunTrace), ProblemError> {
    cfg.validate()?;
    let mut rng = SolverRng::seed_from_u64(cfg.seed);
    let start = Instant::now();
    let mut trace = RunTrace {
        meta,
        points: Vec::new(),
    };
    let mut state = kernel.init(x0)?;
    let mut x = kernel.materialize(&state)?;
    let mut residual = kernel.residual(&x)?;
    trace.points.push(TracePoint {
        iteration: 0,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        residual,
    });
    observer(0, &x, residual);
    let stop = |r: f64| cfg.residual_tol > 0.0 && r <= cfg.residual_tol;
    if stop(residual) {
        return Ok((x, trace));
    }
    for k in 1..=cfg.max_iters {
        let idx = sample_index(weights, &mut rng);
        kernel.step(&mut state, idx)?;
        if k % cfg.log_stride == 0 || k == cfg.max_iters {
            x = kernel.materialize(&state)?;
            residual = kernel.residual(&x)?;
            trace.points.push(TracePoint {
                iteration: k,
                elapsed_seconds: start.elapsed().as_secs_f64(),
                residual,
            });
            observer(k, &x, residual);
            if stop(residual) {
                return Ok((x, trace));
            }
        }
    }
    if cfg.max_iters == 0 {
        return Ok((x, trace));
    }
    Ok((kernel.materialize(&state)?, trace))
}

/// Resolves TRK step sizes against the per-row bounds and collects warnings.
pub(crate) fn resolve_row_steps(policy: &StepPolicy, bounds: &[f64]) -> Result<(Vec<f64>, Vec<String>), ProblemError> {
    let steps = match policy {
        StepPolicy::Default => bounds.iter().map(|b| DEFAULT_TRK_ALPHA * b / 2.0).collect(),
        StepPolicy::Coefficient(a) => bounds.iter().map(|b| a * b / 2.0).collect(),
        StepPolicy::Uniform(t) => vec![*t; bounds.len()],
        StepPolicy::Explicit(v) => {
            if v.len() != bounds.len() {
                return Err(ProblemError::Config(format!(
                    "{} explicit steps for {} rows",
                    v.len(),
                    bounds.len()
                )));
            }
            v.clone()
        }
    };
    check_positive(&steps)?;
    let over: Vec<usize> = (0..steps.len()).filter(|&i| steps[i] >= bounds[i]).collect();
    let warnings = match over.first() {
        Some(&i) => vec![format!(
            "step exceeds bound at {} rows (first row {i}: t={} bound={})",
            over.len(),
            steps[i],
            bounds[i]
        )],
        None => Vec::new(),
    };
    Ok((steps, warnings))
}

pub(crate) fn check_positive(steps: &[f64]) -> Result<(), ProblemError> {
    if let Some(i) = steps.iter().position(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(ProblemError::Config(format!("step {i} must be positive and finite, got {}", steps[i])));
    }
    Ok(())
}
