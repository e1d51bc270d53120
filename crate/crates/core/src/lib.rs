//! Randomized Kaczmarz methods for linear feasibility problems over the
//! t-product of third-order tensors.
//!
//! The crate is organised bottom up:
//!
//! * [`tensor`] holds the dense [`Tensor3`] type and the reference t-product.
//! * [`fourier`] computes t-products slice-wise after a tube-wise DFT.
//! * [`feasibility`] describes problems, residuals, step bounds and the
//!   distance/Hoffman oracles.
//! * [`solvers`] implements B-MRK, TRK-L and TRK-LB.
//! * [`generators`] builds the synthetic and image-deblurring instances.
//! * [`harness`] runs experiments, persists traces and fits rates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feasibility;
pub mod fourier;
pub mod generators;
pub mod harness;
pub mod solvers;
pub mod tensor;

#[cfg(test)]
mod testutil;

pub use error::{HarnessError, ProblemError, TensorError};
pub use feasibility::{ConstraintPartition, FeasibilityProblem, RowPaving};
pub use fourier::FourierTensor3;
pub use solvers::{RunTrace, SolverConfig, StepPolicy, TracePoint};
pub use tensor::{Matrix, Tensor3};
