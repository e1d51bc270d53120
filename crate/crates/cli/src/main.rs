use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tenkacz_core::generators::{generate, Family, GenSpec};
use tenkacz_core::harness::{
    fit_rate, read_trace, run_deblur, run_selftest, run_trials, write_deblur_outputs, write_problem, ExperimentConfig, InitKind,
    RateOptions, SolverKind,
};
use tenkacz_core::solvers::StepPolicy;

#[derive(Parser, Debug)]
#[command(name = "tenkacz", version, about = "Randomized Kaczmarz solvers for matrix and t-product tensor feasibility problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a problem and write it as a directory of tensor files.
    Gen(GenCmd),
    /// Block matrix randomized Kaczmarz on a paved matrix problem.
    Bmrk(SolveCmd),
    /// Tensor randomized Kaczmarz for mixed equality/inequality systems.
    Trkl(SolveCmd),
    /// Tensor randomized Kaczmarz for equality systems with bounds.
    Trklb(SolveCmd),
    /// Deblur a phantom (or given) stack from several initializations.
    Deblur(DeblurCmd),
    /// Fit a per-iteration convergence rate to a trace file.
    Rate(RateCmd),
    /// Run the built-in oracle suites.
    Selftest(SelftestCmd),
}

#[derive(Args, Debug, Clone, Default)]
struct GenArgs {
    /// Problem family: matrix_gaussian, classification, tensor_gaussian, eq_bound, deblur.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    m_eq: Option<usize>,
    #[arg(long)]
    m_ineq: Option<usize>,
    /// Row count for eq_bound, data points for classification.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GenCmd {
    /// Experiment config supplying the family and sizes.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
    /// Output directory.
    #[arg(long, default_value = "problem")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Default)]
struct RunArgs {
    #[arg(long)]
    max_iters: Option<usize>,
    /// Step coefficient: t_i = alpha * bound_i / 2 (TRK), t = alpha (B-MRK).
    #[arg(long, conflicts_with = "step")]
    alpha: Option<f64>,
    /// The same explicit step for every row or block.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    log_stride: Option<usize>,
    /// Stop once the residual is at or below this value.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// zero, blurred or random.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    init_std: Option<f64>,
    /// Output directory for traces.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveCmd {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem directory written by `gen`.
    #[arg(long, conflicts_with = "config")]
    problem: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Generate the problem once instead of once per trial.
    #[arg(long)]
    fixed_problem: bool,
}

#[derive(Args, Debug)]
struct DeblurCmd {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Image height (first mode).
    #[arg(long)]
    height: Option<usize>,
    /// Image width (tube mode).
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    /// Input `.pgm` frame or `.t3d` stack; the phantom otherwise.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Solve the noisy interval system with TRK-L.
    #[arg(long)]
    noisy: bool,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated initializations.
    #[arg(long, value_delimiter = ',', default_values_t = ["zero".to_string(), "blurred".to_string(), "random".to_string()])]
    inits: Vec<String>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct RateCmd {
    trace: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    burn_in: f64,
    #[arg(long, default_value_t = 10)]
    min_points: usize,
}

#[derive(Args, Debug)]
struct SelftestCmd {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))
}

fn apply_gen(spec: &mut GenSpec, args: &GenArgs) -> Result<()> {
    if let Some(f) = &args.family {
        let family: Family = f.parse()?;
        if family != spec.family {
            *spec = GenSpec::defaults(family).with_seed(spec.seed);
        }
    }
    if let Some(v) = args.m_eq {
        spec.m_eq = v;
    }
    if let Some(v) = args.m_ineq {
        spec.m_ineq = v;
    }
    if let Some(v) = args.m {
        match spec.family {
            Family::EqBound => spec.m_eq = v,
            Family::Classification => spec.m_ineq = v,
            other => bail!("--m is not used by {other}; pass --m-eq and --m-ineq"),
        }
    }
    for (slot, v) in [(&mut spec.l, args.l), (&mut spec.p, args.p), (&mut spec.n, args.n)] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if args.block_size.is_some() {
        spec.block_size = args.block_size;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    Ok(())
}

fn apply_run(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<()> {
    if let Some(v) = args.max_iters {
        cfg.solver_cfg.max_iters = v;
    }
    if let Some(a) = args.alpha {
        cfg.solver_cfg.step = StepPolicy::Coefficient(a);
    }
    if let Some(t) = args.step {
        cfg.solver_cfg.step = StepPolicy::Uniform(t);
    }
    if let Some(v) = args.log_stride {
        cfg.solver_cfg.log_stride = v;
    }
    if let Some(v) = args.tol {
        cfg.solver_cfg.residual_tol = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = &args.init {
        cfg.init = v.parse::<InitKind>().map_err(anyhow::Error::msg)?;
    }
    if let Some(v) = args.init_std {
        cfg.init_std = v;
    }
    if let Some(v) = &args.out {
        cfg.output_dir = v.clone();
    }
    Ok(())
}

fn cmd_gen(cmd: &GenCmd) -> Result<()> {
    let mut spec = match &cmd.config {
        Some(path) => load_config(path)?.gen,
        None => {
            let family = cmd.gen.family.as_deref().context("pass --family or --config")?;
            GenSpec::defaults(family.parse()?)
        }
    };
    apply_gen(&mut spec, &cmd.gen)?;
    let generated = generate(&spec)?;
    write_problem(&cmd.out, &generated.problem, generated.witness.as_ref())?;
    let (m, l, p, n) = generated.problem.dims();
    println!(
        "{} seed={} dims={m}x{l}x{p}x{n} ineq_rows={} -> {}",
        spec.family,
        spec.seed,
        generated.problem.partition().ineq_rows().len(),
        cmd.out.display()
    );
    Ok(())
}

fn cmd_solve(kind: SolverKind, cmd: &SolveCmd) -> Result<()> {
    let mut cfg = match &cmd.config {
        Some(path) => load_config(path)?,
        None => {
            let family = match (&cmd.gen.family, &cmd.problem) {
                (Some(f), _) => f.parse()?,
                (None, Some(_)) => Family::TensorGaussian,
                (None, None) => bail!("pass --config, --problem or --family"),
            };
            ExperimentConfig::new(GenSpec::defaults(family), kind)
        }
    };
    cfg.solver = kind;
    apply_gen(&mut cfg.gen, &cmd.gen)?;
    if let Some(s) = cmd.gen.seed {
        cfg.solver_cfg.seed = s;
    }
    apply_run(&mut cfg, &cmd.run)?;
    if let Some(dir) = &cmd.problem {
        cfg.problem = Some(dir.clone());
    }
    cfg.fixed_problem |= cmd.fixed_problem;
    cfg.validate().map_err(anyhow::Error::msg)?;
    let out = run_trials(&cfg)?;
    for r in &out.results {
        let first = r.trace.initial_residual().unwrap_or(f64::NAN);
        let last = r.trace.final_residual().unwrap_or(f64::NAN);
        println!(
            "trial {} seed={} iterations={} residual {first:e} -> {last:e}",
            r.index,
            r.seed,
            r.trace.last_iteration()
        );
        for w in &r.trace.meta.warnings {
            eprintln!("warning: trial {}: {w}", r.index);
        }
    }
    if let Some(last) = out.summary.last() {
        println!("median residual at iteration {}: {:e}", last.iteration, last.median_residual);
    }
    println!("summary -> {}", out.summary_path.display());
    Ok(())
}

fn cmd_deblur(cmd: &DeblurCmd) -> Result<()> {
    let mut cfg = match &cmd.config {
        Some(path) => load_config(path)?,
        None => {
            let mut c = ExperimentConfig::new(GenSpec::defaults(Family::Deblur), SolverKind::Trklb);
            c.init_std = 88.0;
            c.solver_cfg.max_iters = 20_000;
            c.solver_cfg.log_stride = 100;
            c.output_dir = PathBuf::from("deblur_out");
            c
        }
    };
    if cfg.gen.family != Family::Deblur {
        bail!("deblur needs family = deblur, config has {}", cfg.gen.family);
    }
    for (slot, v) in [(&mut cfg.gen.l, cmd.height), (&mut cfg.gen.n, cmd.width), (&mut cfg.gen.p, cmd.frames)] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(s) = cmd.seed {
        cfg.gen.seed = s;
        cfg.solver_cfg.seed = s;
    }
    if cmd.image.is_some() {
        cfg.image = cmd.image.clone();
    }
    if cmd.noisy || cmd.epsilon.is_some() {
        let mut noise = cfg.gen.noise.unwrap_or_default();
        if let Some(e) = cmd.epsilon {
            noise.epsilon = e;
        }
        cfg.gen.noise = Some(noise);
    }
    apply_run(&mut cfg, &cmd.run)?;
    let inits = cmd
        .inits
        .iter()
        .map(|s| s.parse::<InitKind>().map_err(anyhow::Error::msg))
        .collect::<Result<Vec<_>>>()?;
    let report = run_deblur(&cfg, &inits)?;
    write_deblur_outputs(&cfg, &report)?;
    let mode = if report.noisy { "noisy (TRK-L)" } else { "exact (TRK-LB)" };
    println!("mode: {mode}");
    println!("blurred input psnr: {:.4} dB", report.blurred_psnr);
    for run in &report.runs {
        println!(
            "init={} psnr={:.4} dB residual {:e} -> {:e}",
            run.init,
            run.psnr,
            run.trace.initial_residual().unwrap_or(f64::NAN),
            run.trace.final_residual().unwrap_or(f64::NAN)
        );
    }
    println!("outputs -> {}", cfg.output_dir.display());
    Ok(())
}

fn cmd_rate(cmd: &RateCmd) -> Result<()> {
    let trace = read_trace(&cmd.trace)?;
    let fit = fit_rate(
        &trace.points,
        &RateOptions {
            burn_in: cmd.burn_in,
            min_points: cmd.min_points,
        },
    )?;
    println!("slope={}", fit.slope);
    println!("factor={}", fit.factor());
    println!("r_squared={}", fit.r_squared);
    println!("points={}", fit.points_used);
    if fit.hit_zero {
        println!("note: residual reached 0; fitted the positive prefix only");
    }
    Ok(())
}

fn cmd_selftest(cmd: &SelftestCmd) -> Result<bool> {
    let results = run_selftest(cmd.seed);
    let mut ok = true;
    for r in &results {
        match &r.failure {
            None => println!("PASS {} ({} cases)", r.name, r.cases),
            Some(msg) => {
                ok = false;
                println!("FAIL {}: {msg}", r.name);
            }
        }
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Gen(c) => cmd_gen(c)?,
        Command::Bmrk(c) => cmd_solve(SolverKind::Bmrk, c)?,
        Command::Trkl(c) => cmd_solve(SolverKind::Trkl, c)?,
        Command::Trklb(c) => cmd_solve(SolverKind::Trklb, c)?,
        Command::Deblur(c) => cmd_deblur(c)?,
        Command::Rate(c) => cmd_rate(c)?,
        Command::Selftest(c) => return cmd_selftest(c),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("tenkacz: error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
