//! Seeded problem generators.
//!
//! Every generator is a pure function of its arguments: the same sizes and
//! seed give bit-identical problems. Random draws come from one
//! [`SolverRng`] stream in a fixed order (operator, witness, then shifts).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_distr::{StandardNormal, Uniform};

use crate::error::ProblemError;
use crate::feasibility::{ConstraintPartition, FeasibilityProblem, RowPaving};
use crate::fourier::{dft_tubes, tprod_fft};
use crate::solvers::SolverRng;
use crate::tensor::Tensor3;

/// Classification rows whose margin falls below this are redrawn.
pub const CLASSIFICATION_MARGIN: f64 = 1e-4;
pub const CLASSIFICATION_RHS: f64 = -1e-5;
pub const DEFAULT_EPSILON: f64 = 0.2;
pub const DEFAULT_NOISE_HALF_WIDTH: f64 = 0.2;
pub const DEFAULT_KERNEL_SIZE: usize = 5;
pub const DEFAULT_KERNEL_SIGMA: f64 = 2.0;

const WITNESS_TOL_MATRIX: f64 = 1e-12;
const WITNESS_TOL_TENSOR: f64 = 1e-10;
const CLASSIFICATION_MAX_REDRAWS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    MatrixGaussian,
    Classification,
    TensorGaussian,
    EqBound,
    Deblur,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::MatrixGaussian,
        Family::Classification,
        Family::TensorGaussian,
        Family::EqBound,
        Family::Deblur,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::MatrixGaussian => "matrix_gaussian",
            Family::Classification => "classification",
            Family::TensorGaussian => "tensor_gaussian",
            Family::EqBound => "eq_bound",
            Family::Deblur => "deblur",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| ProblemError::Generator(format!("unknown family `{s}`")))
    }
}

/// Noise settings for the noisy deblurring mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Interval half-width of the constraint `B - eps <= A * X <= B + eps`.
    pub epsilon: f64,
    /// Noise entries are uniform on `[-half_width, half_width]`.
    pub half_width: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            half_width: DEFAULT_NOISE_HALF_WIDTH,
        }
    }
}

/// Family plus sizes. Unused sizes are ignored by a family:
///
/// | family | sizes used |
/// |---|---|
/// | `matrix_gaussian` | `m_eq, m_ineq, l, p, block_size` |
/// | `classification` | `m_ineq` (data points), `l` (features), `block_size` |
/// | `tensor_gaussian` | `m_eq, m_ineq, l, p, n` |
/// | `eq_bound` | `m_eq, l, p, n` |
/// | `deblur` | `l` (height), `p` (frames), `n` (width), `noise` |
#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub family: Family,
    pub m_eq: usize,
    pub m_ineq: usize,
    pub l: usize,
    pub p: usize,
    pub n: usize,
    pub block_size: Option<usize>,
    pub seed: u64,
    pub noise: Option<NoiseSpec>,
}

impl GenSpec {
    /// Default sizes for each family.
    pub fn defaults(family: Family) -> Self {
        let base = Self {
            family,
            m_eq: 0,
            m_ineq: 0,
            l: 1,
            p: 1,
            n: 1,
            block_size: None,
            seed: 0,
            noise: None,
        };
        match family {
            Family::MatrixGaussian => Self {
                m_eq: 500,
                m_ineq: 700,
                l: 100,
                p: 7,
                block_size: Some(10),
                ..base
            },
            Family::Classification => Self {
                m_ineq: 10_000,
                l: 100,
                block_size: Some(10),
                ..base
            },
            Family::TensorGaussian => Self {
                m_eq: 50,
                m_ineq: 70,
                l: 50,
                p: 7,
                n: 10,
                ..base
            },
            Family::EqBound => Self {
                m_eq: 100,
                l: 50,
                p: 7,
                n: 10,
                ..base
            },
            Family::Deblur => Self {
                l: 128,
                p: 12,
                n: 128,
                ..base
            },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn m(&self) -> usize {
        self.m_eq + self.m_ineq
    }
}

/// A generated problem plus a feasible point when one is known.
#[derive(Clone, Debug)]
pub struct Generated {
    pub problem: FeasibilityProblem,
    pub witness: Option<Tensor3>,
}

pub fn generate(spec: &GenSpec) -> Result<Generated, ProblemError> {
    let (problem, witness) = match spec.family {
        Family::MatrixGaussian => {
            let block = spec.block_size.unwrap_or(1);
            gen_matrix_gaussian(spec.m_eq, spec.m_ineq, spec.l, spec.p, block, spec.seed)?
        }
        Family::Classification => {
            let (p, w) = gen_classification(spec.m_ineq, spec.l, spec.seed)?;
            let p = match spec.block_size {
                Some(size) => {
                    let paving = RowPaving::consecutive(p.partition(), size)?;
                    p.with_paving(paving)?
                }
                None => p,
            };
            (p, w)
        }
        Family::TensorGaussian => gen_tensor_gaussian(spec.m_eq, spec.m_ineq, spec.l, spec.p, spec.n, spec.seed)?,
        Family::EqBound => gen_eq_bound(spec.m_eq, spec.l, spec.p, spec.n, spec.seed)?,
        Family::Deblur => {
            let stack = gen_phantom_stack(spec.l, spec.n, spec.p)?;
            let kernel = gaussian_kernel(DEFAULT_KERNEL_SIZE, DEFAULT_KERNEL_SIGMA)?;
            let mode = match spec.noise {
                Some(noise) => DeblurMode::Noisy { noise, seed: spec.seed },
                None => DeblurMode::Exact,
            };
            let inst = gen_deblur_problem(&stack, &kernel, mode)?;
            (inst.problem, stack)
        }
    };
    Ok(Generated {
        problem,
        witness: Some(witness),
    })
}

pub fn gaussian_tensor(rng: &mut SolverRng, m: usize, l: usize, n: usize) -> Tensor3 {
    Tensor3::from_fn(m, l, n, |_, _, _| rng.sample(StandardNormal))
}

fn require_positive(what: &str, dims: &[usize]) -> Result<(), ProblemError> {
    if dims.contains(&0) {
        return Err(ProblemError::Generator(format!("{what}: sizes {dims:?} must be positive")));
    }
    Ok(())
}

/// Tensor Gaussian system: `B = A * X*`, inequality row slices (after the
/// equality ones) shifted up by `|N(0, 1)|`.
pub fn gen_tensor_gaussian(
    m_eq: usize,
    m_ineq: usize,
    l: usize,
    p: usize,
    n: usize,
    seed: u64,
) -> Result<(FeasibilityProblem, Tensor3), ProblemError> {
    let m = m_eq + m_ineq;
    require_positive("tensor_gaussian", &[m, l, p, n])?;
    let mut rng = SolverRng::seed_from_u64(seed);
    let a = gaussian_tensor(&mut rng, m, l, n);
    let x = gaussian_tensor(&mut rng, l, p, n);
    let mut b = tprod_fft(&dft_tubes(&a), &x)?;
    for i in m_eq..m {
        for v in b.row_slice_data_mut(i) {
            *v += rng.sample::<f64, _>(StandardNormal).abs();
        }
    }
    let ineq: Vec<usize> = (m_eq..m).collect();
    let problem = FeasibilityProblem::new(a, b, ConstraintPartition::new(m, &ineq)?)?;
    let tol = if n == 1 { WITNESS_TOL_MATRIX } else { WITNESS_TOL_TENSOR };
    assert_witness(&problem, &x, tol)?;
    Ok((problem, x))
}

/// Matrix Gaussian system with a consecutive row paving of size `block_size`.
pub fn gen_matrix_gaussian(
    m_eq: usize,
    m_ineq: usize,
    l: usize,
    p: usize,
    block_size: usize,
    seed: u64,
) -> Result<(FeasibilityProblem, Tensor3), ProblemError> {
    let (problem, x) = gen_tensor_gaussian(m_eq, m_ineq, l, p, 1, seed)?;
    let paving = RowPaving::consecutive(problem.partition(), block_size)?;
    Ok((problem.with_paving(paving)?, x))
}

/// Linear classification as `A x <= b` with `A = -diag(y) X_D`,
/// `b = -1e-5`. Returns the problem and the scaled witness `c w*`,
/// `c = 1 / min_i |X_D(i,:) w*|`.
pub fn gen_classification(points: usize, features: usize, seed: u64) -> Result<(FeasibilityProblem, Tensor3), ProblemError> {
    require_positive("classification", &[points, features])?;
    let mut rng = SolverRng::seed_from_u64(seed);
    let mut data = gaussian_tensor(&mut rng, points, features, 1);
    let w: Vec<f64> = (0..features).map(|_| rng.sample(StandardNormal)).collect();
    let mut min_margin = f64::INFINITY;
    for i in 0..points {
        let mut redraws = 0;
        let margin = loop {
            let s: f64 = data.row_slice_data(i).iter().zip(&w).map(|(a, b)| a * b).sum();
            if s.abs() >= CLASSIFICATION_MARGIN {
                break s;
            }
            redraws += 1;
            if redraws > CLASSIFICATION_MAX_REDRAWS {
                return Err(ProblemError::Generator("classification margin resampling did not terminate".into()));
            }
            for v in data.row_slice_data_mut(i) {
                *v = rng.sample(StandardNormal);
            }
        };
        // A(i,:) = -y_i X_D(i,:) with y_i = sign(margin).
        let y = margin.signum();
        for v in data.row_slice_data_mut(i) {
            *v *= -y;
        }
        min_margin = min_margin.min(margin.abs());
    }
    let c = 1.0 / min_margin;
    let witness = Tensor3::from_vec(features, 1, 1, w.iter().map(|v| c * v).collect())?;
    let b = Tensor3::filled(points, 1, 1, CLASSIFICATION_RHS);
    let problem = FeasibilityProblem::new(data, b, ConstraintPartition::all_inequality(points))?;
    assert_witness(&problem, &witness, WITNESS_TOL_MATRIX)?;
    Ok((problem, witness))
}

/// Equality system `A * X = A * X*` with upper bound `X* + |N(0, 1)|`.
pub fn gen_eq_bound(m: usize, l: usize, p: usize, n: usize, seed: u64) -> Result<(FeasibilityProblem, Tensor3), ProblemError> {
    require_positive("eq_bound", &[m, l, p, n])?;
    let mut rng = SolverRng::seed_from_u64(seed);
    let a = gaussian_tensor(&mut rng, m, l, n);
    let x = gaussian_tensor(&mut rng, l, p, n);
    let b = tprod_fft(&dft_tubes(&a), &x)?;
    let mut upper = x.clone();
    for v in upper.as_mut_slice() {
        *v += rng.sample::<f64, _>(StandardNormal).abs();
    }
    let problem = FeasibilityProblem::new(a, b, ConstraintPartition::all_equality(m))?.with_upper_bound(upper)?;
    assert_witness(&problem, &x, WITNESS_TOL_TENSOR)?;
    Ok((problem, x))
}

fn assert_witness(problem: &FeasibilityProblem, x: &Tensor3, tol: f64) -> Result<(), ProblemError> {
    let scale = 1.0 + problem.rhs().frob_norm_sq().sqrt();
    if problem.is_feasible(x, tol * scale)? {
        Ok(())
    } else {
        Err(ProblemError::Generator("generated witness is not feasible".into()))
    }
}

/// Normalized 1D Gaussian of odd `size`, indexed `-size/2 ..= size/2`.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>, ProblemError> {
    if size.is_multiple_of(2) {
        return Err(ProblemError::Generator(format!("kernel size {size} must be odd")));
    }
    if !(sigma > 0.0) {
        return Err(ProblemError::Generator(format!("kernel sigma {sigma} must be positive")));
    }
    let h = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - h;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Separable blur `g (x) g` as an `l x l x n` operator: zero boundary along the
/// height (first mode) and circular along the width (tube mode).
///
/// `A(:, :, k) = g_wrap(k) T`, `T(r, c) = g(r - c)`.
pub fn build_blur_operator(l: usize, n: usize, kernel: &[f64]) -> Result<Tensor3, ProblemError> {
    require_positive("blur operator", &[l, n])?;
    let size = kernel.len();
    if size.is_multiple_of(2) {
        return Err(ProblemError::Generator(format!("kernel size {size} must be odd")));
    }
    if size > l.min(n) {
        return Err(ProblemError::Generator(format!(
            "kernel size {size} exceeds image size {l}x{n}"
        )));
    }
    let h = (size / 2) as isize;
    let g = |d: isize| -> f64 {
        if d.abs() <= h {
            kernel[(d + h) as usize]
        } else {
            0.0
        }
    };
    let mut wrap = vec![0.0; n];
    for d in -h..=h {
        wrap[d.rem_euclid(n as isize) as usize] += g(d);
    }
    Ok(Tensor3::from_fn(l, l, n, |r, c, k| wrap[k] * g(r as isize - c as isize)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeblurMode {
    /// `A * X = B`, `X >= 0`.
    Exact,
    /// `B~ - eps <= A * X <= B~ + eps`, `X >= 0`, with `B~ = B + N`.
    Noisy { noise: NoiseSpec, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct DeblurInstance {
    pub problem: FeasibilityProblem,
    /// The blur operator `A`.
    pub operator: Tensor3,
    /// `B` in exact mode, `B~` in noisy mode.
    pub observed: Tensor3,
}

/// Deblurring problem for an `l x p x n` stack (height, frames, width).
pub fn gen_deblur_problem(stack: &Tensor3, kernel: &[f64], mode: DeblurMode) -> Result<DeblurInstance, ProblemError> {
    let (l, p, n) = stack.dims();
    if stack.as_slice().iter().any(|&v| !(v >= 0.0)) {
        return Err(ProblemError::Generator("image stack must be nonnegative".into()));
    }
    let op = build_blur_operator(l, n, kernel)?;
    let blurred = tprod_fft(&dft_tubes(&op), stack)?;
    match mode {
        DeblurMode::Exact => {
            let problem = FeasibilityProblem::new(op.clone(), blurred.clone(), ConstraintPartition::all_equality(l))?
                .with_lower_bound(Tensor3::zeros(l, p, n))?;
            Ok(DeblurInstance {
                problem,
                operator: op,
                observed: blurred,
            })
        }
        DeblurMode::Noisy { noise, seed } => {
            if !(noise.epsilon > 0.0) {
                return Err(ProblemError::Generator(format!("epsilon {} must be positive", noise.epsilon)));
            }
            if !(noise.half_width >= 0.0) {
                return Err(ProblemError::Generator("noise half-width must be nonnegative".into()));
            }
            let mut rng = SolverRng::seed_from_u64(seed);
            let mut observed = blurred;
            if noise.half_width > 0.0 {
                let law = Uniform::new_inclusive(-noise.half_width, noise.half_width)
                    .map_err(|e| ProblemError::Generator(e.to_string()))?;
                for v in observed.as_mut_slice() {
                    *v += rng.sample(law);
                }
            }
            let eps = noise.epsilon;
            let neg_op = op.scale(-1.0);
            let neg_id = Tensor3::t_identity(l, n).scale(-1.0);
            let full_op = Tensor3::vstack(&[&op, &neg_op, &neg_id])?;
            let upper = observed.map(|v| v + eps);
            let lower = observed.map(|v| -(v - eps));
            let rhs = Tensor3::vstack(&[&upper, &lower, &Tensor3::zeros(l, p, n)])?;
            let problem = FeasibilityProblem::new(full_op, rhs, ConstraintPartition::all_inequality(3 * l))?;
            Ok(DeblurInstance {
                problem,
                operator: op,
                observed,
            })
        }
    }
}

/// Deterministic synthetic grayscale stack in `[0, 255]`: nested ellipses and a
/// rectangle whose sizes and intensities drift from frame to frame.
pub fn gen_phantom_stack(l: usize, n: usize, frames: usize) -> Result<Tensor3, ProblemError> {
    require_positive("phantom", &[l, n, frames])?;
    let shape = |frame: usize, y: f64, x: f64| -> f64 {
        let s = if frames > 1 { frame as f64 / (frames - 1) as f64 } else { 0.0 };
        let inside = |cy: f64, cx: f64, ry: f64, rx: f64| ((y - cy) / ry).powi(2) + ((x - cx) / rx).powi(2) <= 1.0;
        let mut v = 0.0;
        if inside(0.0, 0.0, 0.92, 0.72) {
            v = 200.0;
        }
        if inside(0.0, 0.0, 0.84, 0.64) {
            v = 60.0 + 20.0 * s;
        }
        if inside(-0.2, -0.25, 0.30 - 0.1 * s, 0.16) {
            v = 150.0;
        }
        if inside(-0.2, 0.25, 0.22 + 0.1 * s, 0.14) {
            v = 120.0 - 30.0 * s;
        }
        if inside(0.45, 0.0, 0.12, 0.2 + 0.1 * s) {
            v = 235.0;
        }
        if (0.1..=0.3).contains(&y) && (-0.1 - 0.1 * s..=0.1 + 0.1 * s).contains(&x) {
            v = 180.0;
        }
        v
    };
    Ok(Tensor3::from_fn(l, frames, n, |i, j, k| {
        let y = 2.0 * (i as f64 + 0.5) / l as f64 - 1.0;
        let x = 2.0 * (k as f64 + 0.5) / n as f64 - 1.0;
        shape(j, y, x)
    }))
}
