//! Constraint systems, residuals, step-size bounds and exact distance oracles.

use nalgebra::DVector;

use crate::error::ProblemError;
use crate::fourier::{dft_tubes, tprod_fft_with, FourierTensor3, TubeFft};
use crate::tensor::{bcirc, unfold, Matrix, Tensor3};

/// Singular values below this fraction of the largest are treated as zero.
pub const DEFAULT_RANK_RTOL: f64 = 1e-10;

/// Entrywise slack used when deciding whether a point is feasible.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Split of the row slices `0..m` into inequality and equality rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintPartition {
    m: usize,
    ineq_rows: Vec<usize>,
    eq_rows: Vec<usize>,
    is_ineq: Vec<bool>,
}

impl ConstraintPartition {
    /// Rows in `ineq_rows` are inequalities; every other row is an equality.
    pub fn new(m: usize, ineq_rows: &[usize]) -> Result<Self, ProblemError> {
        let mut is_ineq = vec![false; m];
        for &r in ineq_rows {
            if r >= m {
                return Err(ProblemError::Partition(format!("row {r} out of range for m = {m}")));
            }
            if is_ineq[r] {
                return Err(ProblemError::Partition(format!("row {r} listed twice")));
            }
            is_ineq[r] = true;
        }
        Ok(Self::from_flags(is_ineq))
    }

    pub fn from_flags(is_ineq: Vec<bool>) -> Self {
        let ineq_rows = (0..is_ineq.len()).filter(|&r| is_ineq[r]).collect();
        let eq_rows = (0..is_ineq.len()).filter(|&r| !is_ineq[r]).collect();
        Self {
            m: is_ineq.len(),
            ineq_rows,
            eq_rows,
            is_ineq,
        }
    }

    pub fn all_equality(m: usize) -> Self {
        Self::from_flags(vec![false; m])
    }

    pub fn all_inequality(m: usize) -> Self {
        Self::from_flags(vec![true; m])
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ineq_rows(&self) -> &[usize] {
        &self.ineq_rows
    }

    pub fn eq_rows(&self) -> &[usize] {
        &self.eq_rows
    }

    #[inline]
    pub fn is_ineq(&self, row: usize) -> bool {
        self.is_ineq[row]
    }

    pub fn is_equality_only(&self) -> bool {
        self.ineq_rows.is_empty()
    }
}

/// Disjoint row blocks; blocks `0..ineq_block_count` cover the inequality
/// rows and the remaining blocks cover the equality rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowPaving {
    blocks: Vec<Vec<usize>>,
    ineq_block_count: usize,
}

impl RowPaving {
    pub fn new(blocks: Vec<Vec<usize>>, ineq_block_count: usize) -> Result<Self, ProblemError> {
        if ineq_block_count > blocks.len() {
            return Err(ProblemError::Paving(format!(
                "{ineq_block_count} inequality blocks declared but only {} blocks",
                blocks.len()
            )));
        }
        if blocks.iter().any(Vec::is_empty) {
            return Err(ProblemError::Paving("empty block".into()));
        }
        Ok(Self {
            blocks,
            ineq_block_count,
        })
    }

    /// Consecutive runs of `block_size` rows within each constraint group; the
    /// last block of a group is smaller when the size does not divide it.
    pub fn consecutive(partition: &ConstraintPartition, block_size: usize) -> Result<Self, ProblemError> {
        if block_size == 0 {
            return Err(ProblemError::Paving("block size must be positive".into()));
        }
        let ineq: Vec<Vec<usize>> = partition.ineq_rows().chunks(block_size).map(<[usize]>::to_vec).collect();
        let ineq_block_count = ineq.len();
        let mut blocks = ineq;
        blocks.extend(partition.eq_rows().chunks(block_size).map(<[usize]>::to_vec));
        Self::new(blocks, ineq_block_count)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn ineq_block_count(&self) -> usize {
        self.ineq_block_count
    }

    #[inline]
    pub fn is_ineq_block(&self, b: usize) -> bool {
        b < self.ineq_block_count
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn validate(&self, partition: &ConstraintPartition) -> Result<(), ProblemError> {
        let mut seen = vec![false; partition.m()];
        for (b, block) in self.blocks.iter().enumerate() {
            let want_ineq = self.is_ineq_block(b);
            for &r in block {
                if r >= partition.m() {
                    return Err(ProblemError::Paving(format!("row {r} out of range")));
                }
                if seen[r] {
                    return Err(ProblemError::Paving(format!("row {r} appears in two blocks")));
                }
                seen[r] = true;
                if partition.is_ineq(r) != want_ineq {
                    return Err(ProblemError::Paving(format!(
                        "block {b} mixes equality and inequality rows (row {r})"
                    )));
                }
            }
        }
        if let Some(r) = seen.iter().position(|s| !s) {
            return Err(ProblemError::Paving(format!("row {r} is not covered")));
        }
        Ok(())
    }
}

/// Operator, right-hand side, constraint split and optional paving/bounds.
///
/// Constraints are `A_{i::} * X <= B_{i::}` for inequality rows and `=` for
/// equality rows, plus `lower <= X <= upper` entrywise when bounds are given.
#[derive(Clone, Debug)]
pub struct FeasibilityProblem {
    op: Tensor3,
    rhs: Tensor3,
    partition: ConstraintPartition,
    paving: Option<RowPaving>,
    upper: Option<Tensor3>,
    lower: Option<Tensor3>,
}

impl FeasibilityProblem {
    pub fn new(op: Tensor3, rhs: Tensor3, partition: ConstraintPartition) -> Result<Self, ProblemError> {
        let (m, _, n) = op.dims();
        let (mb, _, nb) = rhs.dims();
        if m != mb || n != nb {
            return Err(crate::error::TensorError::DimensionMismatch {
                op: "problem rhs",
                left: op.dims(),
                right: rhs.dims(),
            }
            .into());
        }
        if partition.m() != m {
            return Err(ProblemError::Partition(format!(
                "partition covers {} rows, operator has {m}",
                partition.m()
            )));
        }
        if let Some(row) = (0..m).find(|&i| op.row_slice_data(i).iter().all(|&v| v == 0.0)) {
            return Err(ProblemError::ZeroRow { row });
        }
        Ok(Self {
            op,
            rhs,
            partition,
            paving: None,
            upper: None,
            lower: None,
        })
    }

    pub fn with_paving(mut self, paving: RowPaving) -> Result<Self, ProblemError> {
        if self.op.dims().2 != 1 {
            return Err(ProblemError::Paving("row pavings apply to matrix problems (n = 1) only".into()));
        }
        paving.validate(&self.partition)?;
        self.paving = Some(paving);
        Ok(self)
    }

    pub fn with_upper_bound(mut self, upper: Tensor3) -> Result<Self, ProblemError> {
        self.check_bound_dims(&upper)?;
        self.upper = Some(upper);
        Ok(self)
    }

    pub fn with_lower_bound(mut self, lower: Tensor3) -> Result<Self, ProblemError> {
        self.check_bound_dims(&lower)?;
        self.lower = Some(lower);
        Ok(self)
    }

    fn check_bound_dims(&self, bound: &Tensor3) -> Result<(), ProblemError> {
        let want = self.iterate_dims();
        if bound.dims() != want {
            return Err(crate::error::TensorError::DimensionMismatch {
                op: "bound",
                left: want,
                right: bound.dims(),
            }
            .into());
        }
        Ok(())
    }

    pub fn op(&self) -> &Tensor3 {
        &self.op
    }

    pub fn rhs(&self) -> &Tensor3 {
        &self.rhs
    }

    pub fn partition(&self) -> &ConstraintPartition {
        &self.partition
    }

    pub fn paving(&self) -> Option<&RowPaving> {
        self.paving.as_ref()
    }

    pub fn upper_bound(&self) -> Option<&Tensor3> {
        self.upper.as_ref()
    }

    pub fn lower_bound(&self) -> Option<&Tensor3> {
        self.lower.as_ref()
    }

    pub fn has_bounds(&self) -> bool {
        self.upper.is_some() || self.lower.is_some()
    }

    /// Number of row slices `m`.
    pub fn rows(&self) -> usize {
        self.op.dims().0
    }

    /// `(l, p, n)`: dims of an iterate `X`.
    pub fn iterate_dims(&self) -> (usize, usize, usize) {
        let (_, l, n) = self.op.dims();
        (l, self.rhs.dims().1, n)
    }

    /// `(m, l, p, n)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        let (m, l, n) = self.op.dims();
        (m, l, self.rhs.dims().1, n)
    }

    pub fn require_iterate(&self, x: &Tensor3) -> Result<(), ProblemError> {
        if x.dims() != self.iterate_dims() {
            return Err(crate::error::TensorError::DimensionMismatch {
                op: "iterate",
                left: self.iterate_dims(),
                right: x.dims(),
            }
            .into());
        }
        Ok(())
    }

    /// Entrywise projection onto the bound box (identity without bounds).
    pub fn clip_to_bounds(&self, x: &mut Tensor3) {
        let data = x.as_mut_slice();
        if let Some(ub) = &self.upper {
            for (v, &u) in data.iter_mut().zip(ub.as_slice()) {
                *v = v.min(u);
            }
        }
        if let Some(lb) = &self.lower {
            for (v, &lo) in data.iter_mut().zip(lb.as_slice()) {
                *v = v.max(lo);
            }
        }
    }

    /// Whether `x` satisfies every constraint to entrywise slack `tol`.
    pub fn is_feasible(&self, x: &Tensor3, tol: f64) -> Result<bool, ProblemError> {
        self.require_iterate(x)?;
        let mut eval = ResidualEvaluator::new(self);
        let r = eval.raw_residual(x)?;
        let (_, p, n) = self.rhs.dims();
        for i in 0..self.rows() {
            let row = &r.as_slice()[i * p * n..(i + 1) * p * n];
            let ok = if self.partition.is_ineq(i) {
                row.iter().all(|&v| v <= tol)
            } else {
                row.iter().all(|&v| v.abs() <= tol)
            };
            if !ok {
                return Ok(false);
            }
        }
        let within_upper = self
            .upper
            .as_ref()
            .is_none_or(|ub| x.as_slice().iter().zip(ub.as_slice()).all(|(v, u)| v - u <= tol));
        let within_lower = self
            .lower
            .as_ref()
            .is_none_or(|lb| x.as_slice().iter().zip(lb.as_slice()).all(|(v, lo)| lo - v <= tol));
        Ok(within_upper && within_lower)
    }

    /// Same feasible set with the bounds rewritten as inequality row slices:
    /// `E * X <= upper` and `-E * X <= -lower`, appended after the existing
    /// rows (`E` the t-identity).
    pub fn bounds_as_rows(&self) -> Result<FeasibilityProblem, ProblemError> {
        let (l, _, n) = self.iterate_dims();
        let identity = Tensor3::t_identity(l, n);
        let mut ops = vec![self.op.clone()];
        let mut rhs = vec![self.rhs.clone()];
        let mut flags: Vec<bool> = (0..self.rows()).map(|i| self.partition.is_ineq(i)).collect();
        if let Some(ub) = &self.upper {
            ops.push(identity.clone());
            rhs.push(ub.clone());
            flags.extend(std::iter::repeat_n(true, l));
        }
        if let Some(lb) = &self.lower {
            ops.push(identity.scale(-1.0));
            rhs.push(lb.scale(-1.0));
            flags.extend(std::iter::repeat_n(true, l));
        }
        let op = Tensor3::vstack(&ops.iter().collect::<Vec<_>>())?;
        let rhs = Tensor3::vstack(&rhs.iter().collect::<Vec<_>>())?;
        FeasibilityProblem::new(op, rhs, ConstraintPartition::from_flags(flags))
    }

    /// Equivalent matrix system on `unfold(X)`: operator `bcirc(A)`, right-hand
    /// side `unfold(B)`, and one paving block per original row slice holding
    /// the rows of `bcirc(A_{i::})`.
    pub fn to_bcirc_matrix_problem(&self) -> Result<FeasibilityProblem, ProblemError> {
        let (m, _, _, n) = self.dims();
        let op = Tensor3::from_matrix(&bcirc(&self.op));
        let rhs = Tensor3::from_matrix(&unfold(&self.rhs));
        let flags = (0..m * n).map(|r| self.partition.is_ineq(r % m)).collect();
        let partition = ConstraintPartition::from_flags(flags);
        let block = |i: usize| (0..n).map(|k| i + m * k).collect::<Vec<_>>();
        let mut blocks: Vec<Vec<usize>> = self.partition.ineq_rows().iter().map(|&i| block(i)).collect();
        let ineq_count = blocks.len();
        blocks.extend(self.partition.eq_rows().iter().map(|&i| block(i)));
        let mut out = FeasibilityProblem::new(op, rhs, partition)?.with_paving(RowPaving::new(blocks, ineq_count)?)?;
        if let Some(ub) = &self.upper {
            out = out.with_upper_bound(Tensor3::from_matrix(&unfold(ub)))?;
        }
        if let Some(lb) = &self.lower {
            out = out.with_lower_bound(Tensor3::from_matrix(&unfold(lb)))?;
        }
        Ok(out)
    }
}

/// Reusable residual computation with the operator transform cached.
#[derive(Debug)]
pub struct ResidualEvaluator<'a> {
    problem: &'a FeasibilityProblem,
    op_hat: FourierTensor3,
    fft: TubeFft,
}

impl<'a> ResidualEvaluator<'a> {
    pub fn new(problem: &'a FeasibilityProblem) -> Self {
        Self {
            problem,
            op_hat: dft_tubes(problem.op()),
            fft: TubeFft::new(problem.op().dims().2),
        }
    }

    pub fn with_transform(problem: &'a FeasibilityProblem, op_hat: FourierTensor3) -> Self {
        let fft = TubeFft::new(op_hat.dims().2);
        Self { problem, op_hat, fft }
    }

    /// `A * X - B`.
    pub fn raw_residual(&mut self, x: &Tensor3) -> Result<Tensor3, ProblemError> {
        self.problem.require_iterate(x)?;
        let ax = tprod_fft_with(&mut self.fft, &self.op_hat, x)?;
        Ok(ax.sub(self.problem.rhs())?)
    }

    /// `||c_T(A * X - B)||_F^2`: inequality rows clipped at zero from below.
    pub fn clipped_sq(&mut self, x: &Tensor3) -> Result<f64, ProblemError> {
        let r = self.raw_residual(x)?;
        Ok(clipped_sq_norm(&r, self.problem.partition()))
    }

    /// The natural residual for the problem: `e_T` without bounds, the
    /// equality-plus-bound residual otherwise.
    pub fn residual(&mut self, x: &Tensor3) -> Result<f64, ProblemError> {
        if self.problem.has_bounds() {
            if !self.problem.partition().is_equality_only() {
                return Err(ProblemError::Unsupported(
                    "bound constraints are only supported with equality-only partitions".into(),
                ));
            }
            let eq = self.raw_residual(x)?.frob_norm_sq();
            Ok((eq + bound_violation_sq(self.problem, x)).sqrt())
        } else {
            Ok(self.clipped_sq(x)?.sqrt())
        }
    }
}

fn clipped_sq_norm(r: &Tensor3, partition: &ConstraintPartition) -> f64 {
    let (m, p, n) = r.dims();
    (0..m)
        .map(|i| {
            let row = &r.as_slice()[i * p * n..(i + 1) * p * n];
            if partition.is_ineq(i) {
                row.iter().map(|&v| v.max(0.0).powi(2)).sum::<f64>()
            } else {
                row.iter().map(|&v| v * v).sum::<f64>()
            }
        })
        .sum()
}

fn bound_violation_sq(problem: &FeasibilityProblem, x: &Tensor3) -> f64 {
    let upper: f64 = problem.upper_bound().map_or(0.0, |ub| {
        x.as_slice().iter().zip(ub.as_slice()).map(|(v, u)| (v - u).max(0.0).powi(2)).sum()
    });
    let lower: f64 = problem.lower_bound().map_or(0.0, |lb| {
        x.as_slice().iter().zip(lb.as_slice()).map(|(v, lo)| (lo - v).max(0.0).powi(2)).sum()
    });
    upper + lower
}

/// `e_M = ||c_M(AX - B)||_F` for a matrix problem.
pub fn residual_cm(problem: &FeasibilityProblem, x: &Tensor3) -> Result<f64, ProblemError> {
    let (m, l, p, n) = problem.dims();
    if n != 1 {
        return Err(ProblemError::Unsupported(format!("e_M needs a matrix problem, got n = {n}")));
    }
    if problem.has_bounds() {
        return Err(ProblemError::Unsupported("e_M is defined without bound constraints".into()));
    }
    problem.require_iterate(x)?;
    let a = problem.op().as_slice();
    let b = problem.rhs().as_slice();
    let xs = x.as_slice();
    let mut r = Tensor3::zeros(m, p, 1);
    let rs = r.as_mut_slice();
    for i in 0..m {
        for j in 0..p {
            let mut acc = 0.0;
            for c in 0..l {
                acc += a[i * l + c] * xs[c * p + j];
            }
            rs[i * p + j] = acc - b[i * p + j];
        }
    }
    Ok(clipped_sq_norm(&r, problem.partition()).sqrt())
}

/// `e_T = ||c_T(A * X - B)||_F` for a tensor problem without bounds.
pub fn residual_ct(problem: &FeasibilityProblem, x: &Tensor3) -> Result<f64, ProblemError> {
    if problem.has_bounds() {
        return Err(ProblemError::Unsupported("e_T is defined without bound constraints".into()));
    }
    Ok(ResidualEvaluator::new(problem).clipped_sq(x)?.sqrt())
}

/// `sqrt(||A * X - B||^2 + ||(X - upper)_+||^2 + ||(lower - X)_+||^2)`.
pub fn residual_eq_bound(problem: &FeasibilityProblem, x: &Tensor3) -> Result<f64, ProblemError> {
    if !problem.has_bounds() {
        return Err(ProblemError::Unsupported("missing bound constraint".into()));
    }
    ResidualEvaluator::new(problem).residual(x)
}

/// Step-size upper bounds `2 ||A_{i::}||^2 / max_k ||(A_hat_{i::})_k||^2` per
/// row slice; each lies in `[2/n, 2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepBounds {
    pub per_row: Vec<f64>,
    /// B-MRK blocks: the constant 2.
    pub per_block: Option<Vec<f64>>,
}

impl StepBounds {
    pub fn for_paving(paving: &RowPaving) -> Self {
        Self {
            per_row: Vec::new(),
            per_block: Some(vec![2.0; paving.len()]),
        }
    }
}

pub fn step_bounds(a_hat: &FourierTensor3) -> Result<StepBounds, ProblemError> {
    let (m, _, n) = a_hat.dims();
    let per_row = (0..m)
        .map(|i| {
            let norms = a_hat.row_slice_sq_norms(i);
            let row_sq = norms.iter().sum::<f64>() / n as f64;
            let peak = norms.iter().copied().fold(0.0, f64::max);
            if peak == 0.0 {
                Err(ProblemError::ZeroRow { row: i })
            } else {
                Ok(2.0 * row_sq / peak)
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(StepBounds {
        per_row,
        per_block: None,
    })
}

/// Exact distance to `{X : A * X = B}` through the SVD of `bcirc(A)`.
#[derive(Clone, Debug)]
pub struct EqualityDistance {
    pinv: Matrix,
    bcirc_op: Matrix,
    rhs: Matrix,
    n: usize,
    consistency_tol: f64,
}

impl EqualityDistance {
    pub fn new(problem: &FeasibilityProblem) -> Result<Self, ProblemError> {
        Self::with_rank_rtol(problem, DEFAULT_RANK_RTOL)
    }

    pub fn with_rank_rtol(problem: &FeasibilityProblem, rank_rtol: f64) -> Result<Self, ProblemError> {
        if !problem.partition().is_equality_only() || problem.has_bounds() {
            return Err(ProblemError::Unsupported(
                "distance oracle needs an equality-only system without bounds".into(),
            ));
        }
        let bcirc_op = bcirc(problem.op());
        let svd = bcirc_op.clone().svd(true, true);
        let sigma_max = svd.singular_values.max();
        if sigma_max == 0.0 {
            return Err(ProblemError::ZeroOperator);
        }
        let cutoff = rank_rtol * sigma_max;
        let u = svd.u.as_ref().expect("svd computed with U");
        let v_t = svd.v_t.as_ref().expect("svd computed with V^T");
        let mut pinv = Matrix::zeros(bcirc_op.ncols(), bcirc_op.nrows());
        for (s, &sigma) in svd.singular_values.iter().enumerate() {
            if sigma > cutoff {
                pinv += (v_t.row(s).transpose() / sigma) * u.column(s).transpose();
            }
        }
        let rhs = unfold(problem.rhs());
        let consistency_tol = 1e-8 * (1.0 + rhs.norm());
        Ok(Self {
            pinv,
            bcirc_op,
            rhs,
            n: problem.op().dims().2,
            consistency_tol,
        })
    }

    /// The nearest feasible point to `x`.
    pub fn project(&self, x: &Tensor3) -> Result<Tensor3, ProblemError> {
        let ux = unfold(x);
        let r = &self.bcirc_op * &ux - &self.rhs;
        let projected = ux - &self.pinv * r;
        let residual = (&self.bcirc_op * &projected - &self.rhs).norm();
        if residual > self.consistency_tol * (1.0 + projected.norm()) {
            return Err(ProblemError::Inconsistent { residual });
        }
        Ok(crate::tensor::fold(&projected, self.n)?)
    }

    pub fn distance(&self, x: &Tensor3) -> Result<f64, ProblemError> {
        let proj = self.project(x)?;
        Ok(x.sub(&proj)?.frob_norm_sq().sqrt())
    }
}

pub fn distance_oracle_equality(problem: &FeasibilityProblem, x: &Tensor3) -> Result<f64, ProblemError> {
    problem.require_iterate(x)?;
    EqualityDistance::new(problem)?.distance(x)
}

/// `1 / sigma_min^+(bcirc(A))`, the Hoffman constant of an equality system.
pub fn hoffman_equality(a: &Tensor3) -> Result<f64, ProblemError> {
    hoffman_equality_with(a, DEFAULT_RANK_RTOL)
}

pub fn hoffman_equality_with(a: &Tensor3, rank_rtol: f64) -> Result<f64, ProblemError> {
    let sv: DVector<f64> = bcirc(a).singular_values();
    let sigma_max = sv.max();
    if sigma_max == 0.0 {
        return Err(ProblemError::ZeroOperator);
    }
    let cutoff = rank_rtol * sigma_max;
    let smallest = sv.iter().copied().filter(|&s| s > cutoff).fold(f64::INFINITY, f64::min);
    Ok(1.0 / smallest)
}
