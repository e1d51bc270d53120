use crate::error::ProblemError;
use crate::feasibility::{residual_cm, FeasibilityProblem, RowPaving};
use crate::tensor::Tensor3;

use super::{check_positive, drive, Kernel, Observer, RunTrace, SamplingWeights, SolverConfig, StepPolicy, TraceMeta, DEFAULT_BMRK_STEP};

/// Block matrix randomized Kaczmarz on a paved matrix problem (`n = 1`).
#[derive(Debug)]
pub struct Bmrk<'a> {
    problem: &'a FeasibilityProblem,
    paving: &'a RowPaving,
    block_sq_norms: Vec<f64>,
    steps: Vec<f64>,
    warnings: Vec<String>,
    resid: Vec<f64>,
}

impl<'a> Bmrk<'a> {
    pub fn new(problem: &'a FeasibilityProblem, step: &StepPolicy) -> Result<Self, ProblemError> {
        let (_, _, _, n) = problem.dims();
        if n != 1 {
            return Err(ProblemError::Unsupported(format!("B-MRK needs a matrix problem, got n = {n}")));
        }
        if problem.has_bounds() {
            return Err(ProblemError::Unsupported("B-MRK does not handle bound constraints".into()));
        }
        let paving = problem
            .paving()
            .ok_or_else(|| ProblemError::Paving("B-MRK needs a row paving".into()))?;
        let block_sq_norms: Vec<f64> = paving
            .blocks()
            .iter()
            .map(|block| block.iter().map(|&r| row_sq_norm(problem.op().row_slice_data(r))).sum())
            .collect();
        let count = paving.len();
        let steps = match step {
            StepPolicy::Default => vec![DEFAULT_BMRK_STEP; count],
            StepPolicy::Coefficient(t) | StepPolicy::Uniform(t) => vec![*t; count],
            StepPolicy::Explicit(v) if v.len() == count => v.clone(),
            StepPolicy::Explicit(v) => {
                return Err(ProblemError::Config(format!("{} explicit steps for {count} blocks", v.len())))
            }
        };
        check_positive(&steps)?;
        let over = steps.iter().filter(|&&t| t >= 2.0).count();
        let warnings = if over > 0 {
            vec![format!("step >= 2 on {over} blocks")]
        } else {
            Vec::new()
        };
        Ok(Self {
            problem,
            paving,
            block_sq_norms,
            steps,
            warnings,
            resid: Vec::new(),
        })
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn weights(&self) -> Result<SamplingWeights, ProblemError> {
        SamplingWeights::from_sq_norms(&self.block_sq_norms)
    }

    /// One B-MRK update on block `block` with step `t`, in place.
    pub fn step_in_place(&mut self, x: &mut Tensor3, block: usize, t: f64) {
        let (_, l, p, _) = self.problem.dims();
        let a = self.problem.op().as_slice();
        let b = self.problem.rhs().as_slice();
        let rows = &self.paving.blocks()[block];
        let clip = self.paving.is_ineq_block(block);
        self.resid.clear();
        self.resid.resize(rows.len() * p, 0.0);
        let xs = x.as_mut_slice();
        let mut active = false;
        for (bi, &row) in rows.iter().enumerate() {
            for j in 0..p {
                let mut acc = 0.0;
                for c in 0..l {
                    acc += a[row * l + c] * xs[c * p + j];
                }
                let mut r = acc - b[row * p + j];
                if clip {
                    r = r.max(0.0);
                }
                active |= r != 0.0;
                self.resid[bi * p + j] = r;
            }
        }
        if !active {
            return;
        }
        let scale = t / self.block_sq_norms[block];
        for c in 0..l {
            for j in 0..p {
                let mut acc = 0.0;
                for (bi, &row) in rows.iter().enumerate() {
                    acc += a[row * l + c] * self.resid[bi * p + j];
                }
                xs[c * p + j] -= scale * acc;
            }
        }
    }

    fn meta(&self, cfg: &SolverConfig) -> TraceMeta {
        TraceMeta {
            solver: "bmrk".into(),
            dims: self.problem.dims(),
            seed: cfg.seed,
            max_iters: cfg.max_iters,
            residual_tol: cfg.residual_tol,
            log_stride: cfg.log_stride,
            step_policy: cfg.step.to_string(),
            steps: self.steps.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

fn row_sq_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum()
}

impl Kernel for Bmrk<'_> {
    type State = Tensor3;

    fn init(&mut self, x0: &Tensor3) -> Result<Tensor3, ProblemError> {
        self.problem.require_iterate(x0)?;
        Ok(x0.clone())
    }

    fn step(&mut self, state: &mut Tensor3, index: usize) -> Result<(), ProblemError> {
        let t = self.steps[index];
        self.step_in_place(state, index, t);
        Ok(())
    }

    fn materialize(&mut self, state: &Tensor3) -> Result<Tensor3, ProblemError> {
        Ok(state.clone())
    }

    fn residual(&mut self, x: &Tensor3) -> Result<f64, ProblemError> {
        residual_cm(self.problem, x)
    }
}

/// `X - t A_tau^T (A_tau X - B_tau)[_+] / ||A_tau||_F^2`, clipped for
/// inequality blocks.
pub fn bmrk_step(problem: &FeasibilityProblem, x: &Tensor3, block: usize, t: f64) -> Result<Tensor3, ProblemError> {
    let mut solver = Bmrk::new(problem, &StepPolicy::Uniform(t))?;
    problem.require_iterate(x)?;
    if block >= solver.paving.len() {
        return Err(ProblemError::Paving(format!("block {block} out of range")));
    }
    let mut out = x.clone();
    solver.step_in_place(&mut out, block, t);
    Ok(out)
}

pub fn bmrk_solve(problem: &FeasibilityProblem, x0: &Tensor3, cfg: &SolverConfig) -> Result<(Tensor3, RunTrace), ProblemError> {
    bmrk_solve_observed(problem, x0, cfg, &mut |_, _, _| {})
}

pub fn bmrk_solve_observed(
    problem: &FeasibilityProblem,
    x0: &Tensor3,
    cfg: &SolverConfig,
    observer: &mut Observer<'_>,
) -> Result<(Tensor3, RunTrace), ProblemError> {
    let mut solver = Bmrk::new(problem, &cfg.step)?;
    let weights = solver.weights()?;
    let meta = solver.meta(cfg);
    drive(&mut solver, &weights, x0, cfg, meta, observer)
}
