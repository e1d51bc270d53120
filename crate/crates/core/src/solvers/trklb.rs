use crate::error::ProblemError;
use crate::feasibility::{FeasibilityProblem, ResidualEvaluator};
use crate::tensor::Tensor3;

use super::trkl::RowStepper;
use super::{drive, Kernel, Observer, RunTrace, SamplingWeights, SolverConfig, StepPolicy};

/// TRK-L on the equality rows followed by clipping onto the box
/// `lower <= X <= upper` after every step.
#[derive(Debug)]
pub struct Trklb<'a> {
    stepper: RowStepper<'a>,
    evaluator: ResidualEvaluator<'a>,
    steps: Vec<f64>,
    warnings: Vec<String>,
}

impl<'a> Trklb<'a> {
    pub fn new(problem: &'a FeasibilityProblem, step: &StepPolicy) -> Result<Self, ProblemError> {
        if !problem.has_bounds() {
            return Err(ProblemError::Unsupported("TRK-LB needs an upper or lower bound".into()));
        }
        if !problem.partition().is_equality_only() {
            return Err(ProblemError::Unsupported("TRK-LB expects equality rows only".into()));
        }
        let stepper = RowStepper::new(problem);
        let (steps, warnings) = stepper.resolve_steps(step)?;
        let evaluator = ResidualEvaluator::with_transform(problem, stepper.op_hat.clone());
        Ok(Self {
            stepper,
            evaluator,
            steps,
            warnings,
        })
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn weights(&self) -> Result<SamplingWeights, ProblemError> {
        SamplingWeights::from_sq_norms(self.stepper.row_sq_norms())
    }

    fn step_in_place(&mut self, x: &mut Tensor3, row: usize, t: f64) -> Result<(), ProblemError> {
        if let Some(corr) = self.stepper.correction(x, row, t)? {
            for (v, c) in x.as_mut_slice().iter_mut().zip(corr.as_slice()) {
                *v -= c;
            }
        }
        self.stepper.problem.clip_to_bounds(x);
        Ok(())
    }
}

impl Kernel for Trklb<'_> {
    type State = Tensor3;

    fn init(&mut self, x0: &Tensor3) -> Result<Tensor3, ProblemError> {
        self.stepper.problem.require_iterate(x0)?;
        Ok(x0.clone())
    }

    fn step(&mut self, state: &mut Tensor3, index: usize) -> Result<(), ProblemError> {
        let t = self.steps[index];
        self.step_in_place(state, index, t)
    }

    fn materialize(&mut self, state: &Tensor3) -> Result<Tensor3, ProblemError> {
        Ok(state.clone())
    }

    fn residual(&mut self, x: &Tensor3) -> Result<f64, ProblemError> {
        self.evaluator.residual(x)
    }
}

/// One TRK-LB step: equality projection on row `row`, then clipping.
pub fn trklb_step(problem: &FeasibilityProblem, x: &Tensor3, row: usize, t: f64) -> Result<Tensor3, ProblemError> {
    problem.require_iterate(x)?;
    if row >= problem.rows() {
        return Err(ProblemError::Config(format!("row {row} out of range")));
    }
    let mut solver = Trklb::new(problem, &StepPolicy::Uniform(t))?;
    let mut out = x.clone();
    solver.step_in_place(&mut out, row, t)?;
    Ok(out)
}

pub fn trklb_solve(problem: &FeasibilityProblem, x0: &Tensor3, cfg: &SolverConfig) -> Result<(Tensor3, RunTrace), ProblemError> {
    trklb_solve_observed(problem, x0, cfg, &mut |_, _, _| {})
}

pub fn trklb_solve_observed(
    problem: &FeasibilityProblem,
    x0: &Tensor3,
    cfg: &SolverConfig,
    observer: &mut Observer<'_>,
) -> Result<(Tensor3, RunTrace), ProblemError> {
    let mut solver = Trklb::new(problem, &cfg.step)?;
    let weights = solver.weights()?;
    let meta = solver.stepper.meta("trklb", cfg, &solver.steps, &solver.warnings);
    drive(&mut solver, &weights, x0, cfg, meta, observer)
}
