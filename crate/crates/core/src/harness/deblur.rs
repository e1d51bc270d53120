use std::fs;

use crate::error::HarnessError;
use crate::solvers::{RunTrace, SolverConfig};
use crate::tensor::Tensor3;

use super::config::{ExperimentConfig, InitKind, SolverKind};
use super::image::{psnr, stack_frame, write_pgm};
use super::tensor_file::write_tensor;
use super::trace_file::write_trace;
use super::trials::{build_instance, initial_iterate, run_solver};

pub const PEAK: f64 = 255.0;

#[derive(Clone, Debug)]
pub struct DeblurRun {
    pub init: InitKind,
    pub trace: RunTrace,
    pub solution: Tensor3,
    pub psnr: f64,
}

#[derive(Clone, Debug)]
pub struct DeblurReport {
    pub noisy: bool,
    pub truth: Tensor3,
    pub observed: Tensor3,
    pub blurred_psnr: f64,
    pub runs: Vec<DeblurRun>,
}

/// Reconstructs the stack from each initialization: TRK-LB on the exact
/// system, TRK-L on the noisy interval system.
pub fn run_deblur(cfg: &ExperimentConfig, inits: &[InitKind]) -> Result<DeblurReport, HarnessError> {
    let seed = cfg.solver_cfg.seed;
    let inst = build_instance(cfg, seed)?;
    let truth = inst
        .truth
        .clone()
        .ok_or_else(|| HarnessError::Invalid("deblur needs family = deblur".into()))?;
    let observed = inst.observed.clone().expect("deblur instances carry the observation");
    let noisy = cfg.gen.noise.is_some();
    let kind = if noisy { SolverKind::Trkl } else { SolverKind::Trklb };
    let blurred_psnr = psnr(&truth, &observed, PEAK)?;
    let mut runs = Vec::with_capacity(inits.len());
    for &init in inits {
        let x0 = initial_iterate(init, cfg.init_std, &inst, seed)?;
        let solver_cfg = SolverConfig {
            seed,
            ..cfg.solver_cfg.clone()
        };
        let (solution, trace) = run_solver(kind, &inst.problem, &x0, &solver_cfg, &mut |_, _, _| {})?;
        let quality = psnr(&truth, &solution, PEAK)?;
        runs.push(DeblurRun {
            init,
            trace,
            solution,
            psnr: quality,
        });
    }
    Ok(DeblurReport {
        noisy,
        truth,
        observed,
        blurred_psnr,
        runs,
    })
}

/// Writes traces, reconstructed stacks and PGM frames under `cfg.output_dir`.
pub fn write_deblur_outputs(cfg: &ExperimentConfig, report: &DeblurReport) -> Result<(), HarnessError> {
    let dir = &cfg.output_dir;
    let (truth, observed) = (&report.truth, &report.observed);
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let frames = truth.dims().1;
    for j in 0..frames {
        write_pgm(dir.join(format!("truth_{j:02}.pgm")), &stack_frame(truth, j)?)?;
        write_pgm(dir.join(format!("blurred_{j:02}.pgm")), &stack_frame(observed, j)?)?;
    }
    for run in &report.runs {
        let tag = run.init.to_string();
        write_trace(dir.join(format!("trace_{tag}.csv")), &run.trace)?;
        write_tensor(dir.join(format!("recon_{tag}.t3d")), &run.solution)?;
        for j in 0..frames {
            write_pgm(dir.join(format!("recon_{tag}_{j:02}.pgm")), &stack_frame(&run.solution, j)?)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Family, GenSpec, NoiseSpec};

    fn cfg(noisy: bool) -> ExperimentConfig {
        let gen = GenSpec {
            l: 12,
            p: 2,
            n: 10,
            noise: noisy.then(NoiseSpec::default),
            ..GenSpec::defaults(Family::Deblur)
        };
        let mut cfg = ExperimentConfig::new(gen, SolverKind::Trklb);
        cfg.solver_cfg.max_iters = 2000;
        cfg.solver_cfg.log_stride = 100;
        cfg.init_std = 88.0;
        cfg
    }

    #[test]
    fn exact_mode_improves_on_blurred_input() {
        let report = run_deblur(&cfg(false), &[InitKind::Zero, InitKind::Observed]).unwrap();
        for run in &report.runs {
            assert!(run.psnr > report.blurred_psnr, "{:?}: {} vs {}", run.init, run.psnr, report.blurred_psnr);
            assert!(run.solution.as_slice().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn noisy_mode_reduces_residual() {
        let report = run_deblur(&cfg(true), &[InitKind::Zero]).unwrap();
        let t = &report.runs[0].trace;
        assert!(t.final_residual().unwrap() < 0.1 * t.initial_residual().unwrap());
    }

    #[test]
    fn writes_frames_and_traces() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(false);
        c.solver_cfg.max_iters = 20;
        c.output_dir = dir.path().to_path_buf();
        let report = run_deblur(&c, &[InitKind::Zero]).unwrap();
        write_deblur_outputs(&c, &report).unwrap();
        for name in ["truth_01.pgm", "blurred_00.pgm", "trace_zero.csv", "recon_zero.t3d", "recon_zero_01.pgm"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
    }
}
