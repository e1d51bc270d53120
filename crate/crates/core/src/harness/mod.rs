//! Serialization, experiment orchestration and analysis.

pub mod config;
pub mod deblur;
pub mod image;
pub mod problem_dir;
pub mod rate;
pub mod selftest;
pub mod tensor_file;
pub mod trace_file;
pub mod trials;

pub use config::{ExperimentConfig, InitKind, SolverKind};
pub use deblur::{run_deblur, write_deblur_outputs, DeblurReport, DeblurRun};
pub use image::{psnr, read_pgm, stack_frame, write_pgm, Frame};
pub use problem_dir::{read_problem, write_problem};
pub use rate::{fit_rate, RateFit, RateOptions};
pub use selftest::{run_selftest, SuiteResult};
pub use tensor_file::{read_tensor, write_tensor};
pub use trace_file::{read_trace, write_trace};
pub use trials::{median_summary, run_solver, run_trial, run_trials, Instance, SummaryRow, TrialsOutcome};
