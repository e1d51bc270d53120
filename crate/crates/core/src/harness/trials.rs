use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_distr::Normal;
use rayon::prelude::*;

use crate::error::{HarnessError, ProblemError};
use crate::feasibility::FeasibilityProblem;
use crate::generators::{
    gaussian_kernel, gen_deblur_problem, gen_phantom_stack, generate, DeblurMode, Family, GenSpec, DEFAULT_KERNEL_SIGMA,
    DEFAULT_KERNEL_SIZE,
};
use crate::solvers::{bmrk_solve_observed, trkl_solve_observed, trklb_solve_observed, Observer, RunTrace, SolverConfig, SolverRng};
use crate::tensor::Tensor3;

use super::config::{ExperimentConfig, InitKind, SolverKind};
use super::image::{frames_to_stack, read_pgm};
use super::problem_dir::read_problem;
use super::tensor_file::read_tensor;
use super::trace_file::write_trace;

pub const SUMMARY_FILE: &str = "summary.csv";

/// A problem ready to solve, with whatever side information the family
/// provides.
#[derive(Clone, Debug)]
pub struct Instance {
    pub problem: FeasibilityProblem,
    pub witness: Option<Tensor3>,
    /// Deblurring: the observed (blurred, possibly noisy) stack.
    pub observed: Option<Tensor3>,
    /// Deblurring: the ground-truth stack.
    pub truth: Option<Tensor3>,
}

/// Runs `kind` on `problem`. TRK-L on a problem with bounds runs on the
/// equivalent system with the bounds written as inequality rows.
pub fn run_solver(
    kind: SolverKind,
    problem: &FeasibilityProblem,
    x0: &Tensor3,
    cfg: &SolverConfig,
    observer: &mut Observer<'_>,
) -> Result<(Tensor3, RunTrace), ProblemError> {
    match kind {
        SolverKind::Bmrk => bmrk_solve_observed(problem, x0, cfg, observer),
        SolverKind::Trkl if problem.has_bounds() => trkl_solve_observed(&problem.bounds_as_rows()?, x0, cfg, observer),
        SolverKind::Trkl => trkl_solve_observed(problem, x0, cfg, observer),
        SolverKind::Trklb => trklb_solve_observed(problem, x0, cfg, observer),
    }
}

/// Loads the deblurring input named by `image`, or the phantom stack.
pub fn load_stack(image: Option<&Path>, gen: &GenSpec) -> Result<Tensor3, HarnessError> {
    match image {
        None => Ok(gen_phantom_stack(gen.l, gen.n, gen.p)?),
        Some(path) if path.extension().is_some_and(|e| e == "pgm") => Ok(frames_to_stack(&[read_pgm(path)?])?),
        Some(path) => Ok(read_tensor(path)?),
    }
}

/// Builds the instance for one trial seed.
pub fn build_instance(cfg: &ExperimentConfig, seed: u64) -> Result<Instance, HarnessError> {
    if let Some(dir) = &cfg.problem {
        let (problem, witness) = read_problem(dir)?;
        return Ok(Instance {
            problem,
            witness,
            observed: None,
            truth: None,
        });
    }
    let gen = GenSpec {
        seed,
        ..cfg.gen.clone()
    };
    if gen.family == Family::Deblur {
        let stack = load_stack(cfg.image.as_deref(), &gen)?;
        let kernel = gaussian_kernel(DEFAULT_KERNEL_SIZE, DEFAULT_KERNEL_SIGMA)?;
        let mode = match gen.noise {
            Some(noise) => DeblurMode::Noisy { noise, seed },
            None => DeblurMode::Exact,
        };
        let inst = gen_deblur_problem(&stack, &kernel, mode)?;
        return Ok(Instance {
            problem: inst.problem,
            witness: Some(stack.clone()),
            observed: Some(inst.observed),
            truth: Some(stack),
        });
    }
    let generated = generate(&gen)?;
    Ok(Instance {
        problem: generated.problem,
        witness: generated.witness,
        observed: None,
        truth: None,
    })
}

/// Initial iterate; random draws use stream 1 of the trial seed so they never
/// overlap the solver's sampling stream.
pub fn initial_iterate(kind: InitKind, std: f64, inst: &Instance, seed: u64) -> Result<Tensor3, HarnessError> {
    let (l, p, n) = inst.problem.iterate_dims();
    match kind {
        InitKind::Zero => Ok(Tensor3::zeros(l, p, n)),
        InitKind::Observed => inst
            .observed
            .clone()
            .ok_or_else(|| HarnessError::Invalid("blurred initialization needs a deblurring problem".into())),
        InitKind::Random => {
            let mut rng = SolverRng::seed_from_u64(seed);
            rng.set_stream(1);
            let law = Normal::new(0.0, std).map_err(|e| HarnessError::Invalid(e.to_string()))?;
            Ok(Tensor3::from_fn(l, p, n, |_, _, _| rng.sample(law)))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub iteration: usize,
    pub median_residual: f64,
    /// Trials that logged this iteration.
    pub trials: usize,
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Median residual at every logged iteration, over the trials that logged it.
pub fn median_summary(traces: &[RunTrace]) -> Vec<SummaryRow> {
    let mut iterations: Vec<usize> = traces.iter().flat_map(|t| t.points.iter().map(|p| p.iteration)).collect();
    iterations.sort_unstable();
    iterations.dedup();
    iterations
        .into_iter()
        .map(|it| {
            let mut vals: Vec<f64> = traces
                .iter()
                .filter_map(|t| t.points.iter().find(|p| p.iteration == it).map(|p| p.residual))
                .collect();
            SummaryRow {
                iteration: it,
                trials: vals.len(),
                median_residual: median(&mut vals),
            }
        })
        .collect()
}

pub fn write_summary(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Invalid(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| HarnessError::Invalid(format!("{}: {e}", path.display()));
    w.write_record(["iteration", "median_residual", "trials"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.iteration.to_string(), r.median_residual.to_string(), r.trials.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>, HarnessError> {
    let path = path.as_ref();
    let bad = |reason: String| HarnessError::TraceFile {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let get = |i: usize| rec.get(i).ok_or_else(|| bad("short row".into()));
        out.push(SummaryRow {
            iteration: get(0)?.parse().map_err(|_| bad("bad iteration".into()))?,
            median_residual: get(1)?.parse().map_err(|_| bad("bad residual".into()))?,
            trials: get(2)?.parse().map_err(|_| bad("bad trial count".into()))?,
        });
    }
    Ok(out)
}

/// One finished trial.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub index: usize,
    pub seed: u64,
    pub trace: RunTrace,
    pub solution: Tensor3,
    pub instance: Instance,
}

pub fn trace_file_name(index: usize) -> String {
    format!("trial_{index:03}.csv")
}

/// Runs trial `index` with seed `seed + index`.
pub fn run_trial(cfg: &ExperimentConfig, index: usize) -> Result<TrialResult, HarnessError> {
    let seed = cfg.solver_cfg.seed.wrapping_add(index as u64);
    let inst_seed = if cfg.fixed_problem { cfg.gen.seed } else { seed };
    let instance = build_instance(cfg, inst_seed)?;
    let x0 = initial_iterate(cfg.init, cfg.init_std, &instance, seed)?;
    let solver_cfg = SolverConfig {
        seed,
        ..cfg.solver_cfg.clone()
    };
    let (solution, trace) = run_solver(cfg.solver, &instance.problem, &x0, &solver_cfg, &mut |_, _, _| {})?;
    Ok(TrialResult {
        index,
        seed,
        trace,
        solution,
        instance,
    })
}

#[derive(Clone, Debug)]
pub struct TrialsOutcome {
    pub results: Vec<TrialResult>,
    pub summary: Vec<SummaryRow>,
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

/// Runs all trials (in parallel), writes one trace per trial and the median
/// summary into `cfg.output_dir`.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<TrialsOutcome, HarnessError> {
    cfg.validate().map_err(HarnessError::Invalid)?;
    let results: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|j| run_trial(cfg, j))
        .collect::<Result<_, _>>()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut trace_paths = Vec::with_capacity(results.len());
    for r in &results {
        let path = dir.join(trace_file_name(r.index));
        write_trace(&path, &r.trace)?;
        trace_paths.push(path);
    }
    let traces: Vec<RunTrace> = results.iter().map(|r| r.trace.clone()).collect();
    let summary = median_summary(&traces);
    let summary_path = dir.join(SUMMARY_FILE);
    write_summary(&summary_path, &summary)?;
    Ok(TrialsOutcome {
        results,
        summary,
        trace_paths,
        summary_path,
    })
}
