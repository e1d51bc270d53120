use num_complex::Complex64;

use crate::error::ProblemError;
use crate::feasibility::{step_bounds, FeasibilityProblem, ResidualEvaluator};
use crate::fourier::{dft_tubes, fourier_product, real_part_checked, FourierTensor3, TubeFft};
use crate::tensor::Tensor3;

use super::{drive, resolve_row_steps, Kernel, Observer, RunTrace, SamplingWeights, SolverConfig, StepPolicy, TraceMeta};

/// Fourier-domain row projection shared by TRK-L and TRK-LB.
#[derive(Debug)]
pub(crate) struct RowStepper<'a> {
    pub(crate) problem: &'a FeasibilityProblem,
    pub(crate) op_hat: FourierTensor3,
    pub(crate) fft: TubeFft,
    row_sq_norms: Vec<f64>,
    y_hat: Vec<Complex64>,
    r_hat: Vec<Complex64>,
}

impl<'a> RowStepper<'a> {
    pub(crate) fn new(problem: &'a FeasibilityProblem) -> Self {
        let op_hat = dft_tubes(problem.op());
        let n = problem.dims().3;
        let row_sq_norms = (0..problem.rows())
            .map(|i| op_hat.row_slice_sq_norms(i).iter().sum::<f64>() / n as f64)
            .collect();
        Self {
            problem,
            op_hat,
            fft: TubeFft::new(n),
            row_sq_norms,
            y_hat: Vec::new(),
            r_hat: Vec::new(),
        }
    }

    pub(crate) fn row_sq_norms(&self) -> &[f64] {
        &self.row_sq_norms
    }

    /// Computes `R_hat = fft(c(A_i * X - B_i))` into the scratch buffer.
    /// Returns `false` when the (clipped) residual is identically zero.
    fn residual_hat(&mut self, x_hat: &[Complex64], row: usize) -> bool {
        let (_, l, p, n) = self.problem.dims();
        fourier_product(self.op_hat.row_slice_data(row), (1, l, n), x_hat, p, &mut self.y_hat);
        self.fft.inverse(&mut self.y_hat);
        let b = self.problem.rhs().row_slice_data(row);
        let clip = self.problem.partition().is_ineq(row);
        let mut active = false;
        self.r_hat.clear();
        self.r_hat.extend(self.y_hat.iter().zip(b).map(|(y, &bv)| {
            let mut r = y.re - bv;
            if clip {
                r = r.max(0.0);
            }
            active |= r != 0.0;
            Complex64::new(r, 0.0)
        }));
        if active {
            self.fft.forward(&mut self.r_hat);
        }
        active
    }

    /// `X_hat -= (t / ||A_i||^2) conj(A_hat_i)^T R_hat` slice by slice.
    pub(crate) fn step_hat(&mut self, x_hat: &mut [Complex64], row: usize, t: f64) -> bool {
        if !self.residual_hat(x_hat, row) {
            return false;
        }
        let (_, l, p, n) = self.problem.dims();
        let scale = t / self.row_sq_norms[row];
        let a_row = self.op_hat.row_slice_data(row);
        for c in 0..l {
            let a_tube = &a_row[c * n..(c + 1) * n];
            let x_row = &mut x_hat[c * p * n..(c + 1) * p * n];
            for (x_tube, r_tube) in x_row.chunks_exact_mut(n).zip(self.r_hat.chunks_exact(n)) {
                for ((xv, av), rv) in x_tube.iter_mut().zip(a_tube).zip(r_tube) {
                    *xv -= (av.conj() * rv) * scale;
                }
            }
        }
        true
    }

    /// Real-domain correction `(t / ||A_i||^2) A_i^T * c(A_i * X - B_i)`,
    /// or `None` when the row is already satisfied.
    pub(crate) fn correction(&mut self, x: &Tensor3, row: usize, t: f64) -> Result<Option<Tensor3>, ProblemError> {
        let (_, l, p, n) = self.problem.dims();
        let mut x_hat = Vec::with_capacity(x.len());
        self.fft.forward_real(x.as_slice(), &mut x_hat);
        if !self.residual_hat(&x_hat, row) {
            return Ok(None);
        }
        let scale = t / self.row_sq_norms[row];
        let a_row = self.op_hat.row_slice_data(row);
        let mut corr = vec![Complex64::default(); l * p * n];
        for c in 0..l {
            let a_tube = &a_row[c * n..(c + 1) * n];
            let out_row = &mut corr[c * p * n..(c + 1) * p * n];
            for (o_tube, r_tube) in out_row.chunks_exact_mut(n).zip(self.r_hat.chunks_exact(n)) {
                for ((o, av), rv) in o_tube.iter_mut().zip(a_tube).zip(r_tube) {
                    *o = (av.conj() * rv) * scale;
                }
            }
        }
        self.fft.inverse(&mut corr);
        let norm = corr.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let data = real_part_checked(&corr, norm)?;
        Ok(Some(Tensor3::from_vec(l, p, n, data)?))
    }

    pub(crate) fn spatial(&mut self, x_hat: &[Complex64]) -> Result<Tensor3, ProblemError> {
        let (_, l, p, n) = self.problem.dims();
        let mut buf = x_hat.to_vec();
        self.fft.inverse(&mut buf);
        let scale = (x_hat.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64).sqrt();
        let data = real_part_checked(&buf, scale)?;
        Ok(Tensor3::from_vec(l, p, n, data)?)
    }

    pub(crate) fn resolve_steps(&self, policy: &StepPolicy) -> Result<(Vec<f64>, Vec<String>), ProblemError> {
        let bounds = step_bounds(&self.op_hat)?;
        resolve_row_steps(policy, &bounds.per_row)
    }

    pub(crate) fn meta(&self, name: &str, cfg: &SolverConfig, steps: &[f64], warnings: &[String]) -> TraceMeta {
        TraceMeta {
            solver: name.into(),
            dims: self.problem.dims(),
            seed: cfg.seed,
            max_iters: cfg.max_iters,
            residual_tol: cfg.residual_tol,
            log_stride: cfg.log_stride,
            step_policy: cfg.step.to_string(),
            steps: steps.to_vec(),
            warnings: warnings.to_vec(),
        }
    }
}

/// Tensor randomized Kaczmarz for linear feasibility (`A * X <= B` on the
/// inequality rows, `=` elsewhere), iterating in the Fourier domain.
#[derive(Debug)]
pub struct Trkl<'a> {
    stepper: RowStepper<'a>,
    evaluator: ResidualEvaluator<'a>,
    steps: Vec<f64>,
    warnings: Vec<String>,
}

impl<'a> Trkl<'a> {
    pub fn new(problem: &'a FeasibilityProblem, step: &StepPolicy) -> Result<Self, ProblemError> {
        if problem.has_bounds() {
            return Err(ProblemError::Unsupported("TRK-L does not handle bound constraints; use TRK-LB".into()));
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
}

impl Kernel for Trkl<'_> {
    type State = Vec<Complex64>;

    fn init(&mut self, x0: &Tensor3) -> Result<Self::State, ProblemError> {
        self.stepper.problem.require_iterate(x0)?;
        let mut x_hat = Vec::with_capacity(x0.len());
        self.stepper.fft.forward_real(x0.as_slice(), &mut x_hat);
        Ok(x_hat)
    }

    fn step(&mut self, state: &mut Self::State, index: usize) -> Result<(), ProblemError> {
        let t = self.steps[index];
        self.stepper.step_hat(state, index, t);
        Ok(())
    }

    fn materialize(&mut self, state: &Self::State) -> Result<Tensor3, ProblemError> {
        self.stepper.spatial(state)
    }

    fn residual(&mut self, x: &Tensor3) -> Result<f64, ProblemError> {
        Ok(self.evaluator.clipped_sq(x)?.sqrt())
    }
}

/// One TRK-L projection onto row slice `row` with step `t`.
pub fn trkl_step(problem: &FeasibilityProblem, x: &Tensor3, row: usize, t: f64) -> Result<Tensor3, ProblemError> {
    problem.require_iterate(x)?;
    if row >= problem.rows() {
        return Err(ProblemError::Config(format!("row {row} out of range")));
    }
    super::check_positive(&[t])?;
    let mut stepper = RowStepper::new(problem);
    let mut x_hat = Vec::with_capacity(x.len());
    stepper.fft.forward_real(x.as_slice(), &mut x_hat);
    if !stepper.step_hat(&mut x_hat, row, t) {
        return Ok(x.clone());
    }
    stepper.spatial(&x_hat)
}

pub fn trkl_solve(problem: &FeasibilityProblem, x0: &Tensor3, cfg: &SolverConfig) -> Result<(Tensor3, RunTrace), ProblemError> {
    trkl_solve_observed(problem, x0, cfg, &mut |_, _, _| {})
}

pub fn trkl_solve_observed(
    problem: &FeasibilityProblem,
    x0: &Tensor3,
    cfg: &SolverConfig,
    observer: &mut Observer<'_>,
) -> Result<(Tensor3, RunTrace), ProblemError> {
    let mut solver = Trkl::new(problem, &cfg.step)?;
    let weights = solver.weights()?;
    let meta = solver.stepper.meta("trkl", cfg, &solver.steps, &solver.warnings);
    drive(&mut solver, &weights, x0, cfg, meta, observer)
}
