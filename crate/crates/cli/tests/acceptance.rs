//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Oracles here are written independently of
//! the library (explicit block circulant, circular convolution, real DFT sums,
//! SVD of the block circulant).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use anyhow::{anyhow, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use tenkacz_core::feasibility::{hoffman_equality, step_bounds, EqualityDistance};
use tenkacz_core::fourier::{dft_tubes, tprod_fft};
use tenkacz_core::generators::{
    gaussian_tensor, gen_eq_bound, gen_tensor_gaussian, Family, GenSpec, NoiseSpec, DEFAULT_KERNEL_SIGMA,
    DEFAULT_KERNEL_SIZE,
};
use tenkacz_core::harness::trials::{median_summary, run_trial};
use tenkacz_core::harness::{run_deblur, ExperimentConfig, InitKind, SolverKind};
use tenkacz_core::solvers::{trkl_solve_observed, trkl_step, trklb_solve_observed, SolverRng};
use tenkacz_core::tensor::{inner, t_transpose, tprod_naive};
use tenkacz_core::{ConstraintPartition, FeasibilityProblem, Matrix, RunTrace, SolverConfig, StepPolicy, Tensor3};

mod tol {
    use std::time::Duration;

    pub const C1_REL: f64 = 1e-10;
    pub const C1_MIN_INSTANCES: usize = 50;
    pub const C1_BUDGET: Duration = Duration::from_secs(5);

    pub const C2_REL: f64 = 1e-12;
    pub const C2_MIN_INSTANCES: usize = 100;

    pub const C3_ABS: f64 = 1e-12;
    pub const C3_MIN_INSTANCES: usize = 100;

    pub const C4_REL: f64 = 1e-12;

    pub const C5_TRIALS: usize = 200;
    pub const C5_SIGMAS: f64 = 3.0;
    pub const C5_BUDGET: Duration = Duration::from_secs(60);

    pub const C6_TRIALS: usize = 10;
    pub const C6_ITERS: usize = 5000;
    pub const C6_DECREASE: f64 = 1e2;
    pub const C6_BUDGET: Duration = Duration::from_secs(120);

    pub const C7_TRIALS: usize = 10;
    pub const C7_ITERS: usize = 5000;
    pub const C7_ALPHA: f64 = 1.8;

    pub const C8_ITERS: usize = 10_000;

    pub const C9_GAIN_DB: f64 = 3.0;
    pub const C9_ITERS: usize = 50_000;
    pub const C9_NOISY_DECREASE: f64 = 10.0;
    pub const C9_BUDGET: Duration = Duration::from_secs(300);
}

type Criterion = fn() -> Result<Verdict>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, Criterion, Option<Duration>); 10] = [
        ("C1", "tprod_fft matches tprod_naive", c1_oracle_equivalence, Some(tol::C1_BUDGET)),
        ("C2", "identity suite", c2_identities, None),
        ("C3", "step-bound range", c3_step_bounds, None),
        ("C4", "TRK-L step equals matrix-form update", c4_matrix_form, None),
        ("C5", "theoretical rate respected", c5_rate, Some(tol::C5_BUDGET)),
        ("C6", "matrix Gaussian orderings", c6_matrix_orderings, Some(tol::C6_BUDGET)),
        ("C7", "TRK-LB faster than TRK-L", c7_bounds_vs_rows, None),
        ("C8", "TRK-LB iterates respect bounds", c8_bound_invariant, None),
        ("C9", "deblurring improves the blurred input", c9_deblur, Some(tol::C9_BUDGET)),
        ("C10", "CLI determinism", c10_cli_determinism, None),
    ];
    let mut failed = 0;
    for (id, title, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match outcome {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        if let Some(b) = budget {
            if elapsed > b {
                pass = false;
                detail = format!("{detail}; over the {:.0} s budget", b.as_secs_f64());
            }
        }
        failed += usize::from(!pass);
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} {id} {title}: {detail} [{:.2} s]", elapsed.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn rng(seed: u64) -> SolverRng {
    SolverRng::seed_from_u64(seed)
}

fn dims(r: &mut SolverRng) -> (usize, usize, usize, usize) {
    (r.random_range(1..=6), r.random_range(1..=6), r.random_range(1..=6), r.random_range(1..=8))
}

fn frob(t: &Tensor3) -> f64 {
    t.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn diff_norm(a: &Tensor3, b: &Tensor3) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `C(i,j,k) = sum_t sum_q A(i,q,t) X(q,j,(k - t) mod n)`.
fn conv_tprod(a: &Tensor3, x: &Tensor3) -> Tensor3 {
    let (m, l, n) = a.dims();
    let p = x.dims().1;
    Tensor3::from_fn(m, p, n, |i, j, k| {
        let mut s = 0.0;
        for t in 0..n {
            for q in 0..l {
                s += a.at(i, q, t) * x.at(q, j, (k + n - t) % n);
            }
        }
        s
    })
}

/// Block `(r, c)` is the frontal slice `(r - c) mod n`.
fn bcirc_oracle(a: &Tensor3) -> Matrix {
    let (m, l, n) = a.dims();
    Matrix::from_fn(m * n, l * n, |row, col| {
        let (br, i) = (row / m, row % m);
        let (bc, j) = (col / l, col % l);
        a.at(i, j, (br + n - bc) % n)
    })
}

/// Frontal slices stacked vertically.
fn unfold_oracle(t: &Tensor3) -> Matrix {
    let (m, p, n) = t.dims();
    Matrix::from_fn(m * n, p, |row, j| t.at(row % m, j, row / m))
}

fn fold_oracle(mat: &Matrix, n: usize) -> Tensor3 {
    let m = mat.nrows() / n;
    Tensor3::from_fn(m, mat.ncols(), n, |i, j, k| mat[(k * m + i, j)])
}

/// `|sum_t a_t e^{-2 pi i k t / n}|^2` summed over the tubes of row slice `i`.
fn fourier_row_slice_sq(a: &Tensor3, i: usize) -> Vec<f64> {
    let (_, l, n) = a.dims();
    (0..n)
        .map(|k| {
            (0..l)
                .map(|j| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for t in 0..n {
                        let w = -2.0 * PI * (k * t) as f64 / n as f64;
                        re += a.at(i, j, t) * w.cos();
                        im += a.at(i, j, t) * w.sin();
                    }
                    re * re + im * im
                })
                .sum()
        })
        .collect()
}

fn row_sq(a: &Tensor3, i: usize) -> f64 {
    a.row_slice_data(i).iter().map(|v| v * v).sum()
}

fn bound_oracle(a: &Tensor3, i: usize) -> f64 {
    let peak = fourier_row_slice_sq(a, i).into_iter().fold(0.0, f64::max);
    2.0 * row_sq(a, i) / peak
}

fn c1_oracle_equivalence() -> Result<Verdict> {
    let mut r = rng(101);
    let cases = 60;
    ensure!(cases >= tol::C1_MIN_INSTANCES);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (m, l, p, n) = dims(&mut r);
        let a = gaussian_tensor(&mut r, m, l, n);
        let x = gaussian_tensor(&mut r, l, p, n);
        let naive = tprod_naive(&a, &x)?;
        let fast = tprod_fft(&dft_tubes(&a), &x)?;
        let conv = conv_tprod(&a, &x);
        let scale = 1.0 + frob(&naive);
        worst = worst.max(diff_norm(&fast, &naive) / scale).max(diff_norm(&naive, &conv) / scale);
    }
    verdict(
        worst <= tol::C1_REL,
        format!("{cases} instances, worst relative error {worst:.2e} (tolerance {:.0e})", tol::C1_REL),
    )
}

fn c2_identities() -> Result<Verdict> {
    let mut r = rng(202);
    let cases = 120;
    ensure!(cases >= tol::C2_MIN_INSTANCES);
    let (mut norm_err, mut adj_err, mut bcirc_bad, mut prod_bad): (f64, f64, usize, usize) = (0.0, 0.0, 0, 0);
    for _ in 0..cases {
        let (m, l, p, n) = dims(&mut r);
        let a = gaussian_tensor(&mut r, m, l, n);
        let x = gaussian_tensor(&mut r, l, p, n);
        let b = gaussian_tensor(&mut r, m, p, n);

        let fa = frob(&a).powi(2);
        norm_err = norm_err.max((dft_tubes(&a).frob_norm_sq() - n as f64 * fa).abs() / fa.max(1.0));

        let lhs = inner(&conv_tprod(&a, &x), &b)?;
        let rhs = inner(&x, &conv_tprod(&t_transpose(&a), &b))?;
        adj_err = adj_err.max((lhs - rhs).abs() / (1.0 + frob(&a) * frob(&x) * frob(&b)));

        if bcirc_oracle(&t_transpose(&a)) != bcirc_oracle(&a).transpose() {
            bcirc_bad += 1;
        }

        let ax = frob(&conv_tprod(&a, &x));
        let sigma_max = bcirc_oracle(&a).singular_values().max();
        let tight = sigma_max * frob(&x);
        let loose = (n as f64).sqrt() * frob(&a) * frob(&x);
        if ax > tight * (1.0 + tol::C2_REL) + tol::C2_REL || tight > loose * (1.0 + tol::C2_REL) + tol::C2_REL {
            prod_bad += 1;
        }
    }
    let pass = norm_err <= tol::C2_REL && adj_err <= tol::C2_REL && bcirc_bad == 0 && prod_bad == 0;
    verdict(
        pass,
        format!(
            "{cases} instances; norm identity {norm_err:.1e}, adjoint {adj_err:.1e}, bcirc transpose failures {bcirc_bad}, product bound failures {prod_bad} (tolerance {:.0e})",
            tol::C2_REL
        ),
    )
}

fn c3_step_bounds() -> Result<Verdict> {
    let mut r = rng(303);
    let cases = 150;
    ensure!(cases >= tol::C3_MIN_INSTANCES);
    let (mut out_of_range, mut worst_oracle): (usize, f64) = (0, 0.0);
    for _ in 0..cases {
        let (_, l, _, n) = dims(&mut r);
        let a = gaussian_tensor(&mut r, 1, l, n);
        let b = step_bounds(&dft_tubes(&a))?.per_row[0];
        worst_oracle = worst_oracle.max((b - bound_oracle(&a, 0)).abs());
        if b < 2.0 / n as f64 - tol::C3_ABS || b > 2.0 + tol::C3_ABS {
            out_of_range += 1;
        }
    }
    let (mut worst_low, mut worst_high): (f64, f64) = (0.0, 0.0);
    for n in 1..=8 {
        for l in 1..=4 {
            let coeffs: Vec<f64> = (0..l).map(|_| r.random_range(0.5..2.0)).collect();
            let single_fourier = Tensor3::from_fn(1, l, n, |_, j, _| coeffs[j]);
            let flat = Tensor3::from_fn(1, l, n, |_, j, k| if k == 0 { coeffs[j] } else { 0.0 });
            let lo = step_bounds(&dft_tubes(&single_fourier))?.per_row[0];
            let hi = step_bounds(&dft_tubes(&flat))?.per_row[0];
            worst_low = worst_low.max((lo - 2.0 / n as f64).abs());
            worst_high = worst_high.max((hi - 2.0).abs());
        }
    }
    let pass = out_of_range == 0 && worst_oracle <= tol::C3_ABS && worst_low <= tol::C3_ABS && worst_high <= tol::C3_ABS;
    verdict(
        pass,
        format!(
            "{cases} row slices, {out_of_range} outside [2/n, 2], oracle gap {worst_oracle:.1e}; single Fourier slice off 2/n by {worst_low:.1e}, flat spectrum off 2 by {worst_high:.1e}"
        ),
    )
}

fn c4_matrix_form() -> Result<Verdict> {
    let mut r = rng(404);
    let cases = 100;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (m, l, p, n) = dims(&mut r);
        let a = gaussian_tensor(&mut r, m, l, n);
        let x = gaussian_tensor(&mut r, l, p, n);
        let b = gaussian_tensor(&mut r, m, p, n);
        let ineq: Vec<usize> = (0..m).filter(|_| r.random::<bool>()).collect();
        let problem = FeasibilityProblem::new(a.clone(), b.clone(), ConstraintPartition::new(m, &ineq)?)?;
        let i = r.random_range(0..m);
        let t = r.random_range(0.05..1.95);
        let got = trkl_step(&problem, &x, i, t)?;

        let a_i = Tensor3::from_fn(1, l, n, |_, j, k| a.at(i, j, k));
        let b_i = Tensor3::from_fn(1, p, n, |_, j, k| b.at(i, j, k));
        let bc = bcirc_oracle(&a_i);
        let mut res = &bc * unfold_oracle(&x) - unfold_oracle(&b_i);
        if ineq.contains(&i) {
            res.apply(|v| *v = v.max(0.0));
        }
        let alpha = t / row_sq(&a, i);
        let want = fold_oracle(&(unfold_oracle(&x) - bc.transpose() * res * alpha), n);
        worst = worst.max(diff_norm(&got, &want) / (1.0 + frob(&want)));
    }
    verdict(
        worst <= tol::C4_REL,
        format!("{cases} instances, worst relative error {worst:.2e} (tolerance {:.0e})", tol::C4_REL),
    )
}

fn least_squares_slope(ys: &[f64]) -> f64 {
    let len = ys.len() as f64;
    let mx = (len - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / len;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in ys.iter().enumerate() {
        let dx = k as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let h = values.len() / 2;
    if values.len() % 2 == 1 {
        values[h]
    } else {
        0.5 * (values[h - 1] + values[h])
    }
}

fn median_curve(curves: &[Vec<f64>], pick: impl Fn(usize) -> usize, len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| {
            let mut col: Vec<f64> = (0..curves.len()).map(|t| curves[pick(t)][k]).collect();
            median_of(&mut col)
        })
        .collect()
}

fn c5_rate() -> Result<Verdict> {
    let (m, l, p, n) = (20, 8, 1, 3);
    let (problem, witness) = gen_tensor_gaussian(m, 0, l, p, n, 505)?;
    let a = problem.op();

    let sv = bcirc_oracle(a).singular_values();
    let sigma_max = sv.max();
    let sigma_min = sv.iter().copied().filter(|&s| s > 1e-12 * sigma_max).fold(f64::INFINITY, f64::min);
    let gamma = 1.0 / sigma_min;
    ensure!(
        (gamma - hoffman_equality(a)?).abs() <= 1e-10 * gamma,
        "hoffman_equality disagrees with the SVD oracle"
    );

    let cfg0 = SolverConfig::new(1, 0);
    let (_, probe) = trkl_solve_observed(&problem, &Tensor3::zeros(l, p, n), &cfg0, &mut |_, _, _| {})?;
    let steps = probe.meta.steps.clone();
    let total = frob(a).powi(2);
    let mut worst_step: f64 = 0.0;
    let mut min_term = f64::INFINITY;
    for (i, &t) in steps.iter().enumerate() {
        let peak = fourier_row_slice_sq(a, i).into_iter().fold(0.0, f64::max);
        let rs = row_sq(a, i);
        worst_step = worst_step.max((t - 0.9 * 2.0 * rs / peak).abs());
        min_term = min_term.min(2.0 * t * (1.0 - t * peak / (2.0 * rs)));
    }
    ensure!(worst_step <= 1e-12, "default steps differ from 0.9 x bound by {worst_step:e}");
    let rho = 1.0 - min_term / (gamma * gamma * total);
    ensure!(rho > 0.0 && rho < 1.0, "contraction factor {rho} outside (0, 1)");

    let dist = EqualityDistance::new(&problem)?;
    let x0 = Tensor3::zeros(l, p, n);
    let d0 = dist.distance(&x0)?;
    ensure!((d0 - frob(&witness)).abs() <= 1e-8 * d0, "oracle distance at zero differs from the witness norm");

    let iters = ((1e-12f64).ln() / rho.ln()).ceil().clamp(50.0, 3000.0) as usize;
    let mut curves = Vec::with_capacity(tol::C5_TRIALS);
    for trial in 0..tol::C5_TRIALS {
        let cfg = SolverConfig::new(iters, 5000 + trial as u64).with_log_stride(1);
        let mut d2 = Vec::with_capacity(iters + 1);
        let mut failure = None;
        trkl_solve_observed(&problem, &x0, &cfg, &mut |_, x, _| match dist.distance(x) {
            Ok(d) => d2.push(d * d),
            Err(e) => failure = Some(e),
        })?;
        if let Some(e) = failure {
            return Err(e.into());
        }
        ensure!(d2.len() == iters + 1, "expected one distance per iteration");
        curves.push(d2);
    }
    let full = median_curve(&curves, |t| t, iters + 1);
    let floor = 1e-24 * full[0];
    let window = full.iter().take_while(|&&v| v > floor).count();
    ensure!(window >= 20, "median distance collapsed after {window} iterations");
    let logs: Vec<f64> = full[..window].iter().map(|v| v.ln()).collect();
    let slope = least_squares_slope(&logs);

    let mut boot_rng = rng(5050);
    let resamples = 200;
    let slopes: Vec<f64> = (0..resamples)
        .map(|_| {
            let picks: Vec<usize> = (0..curves.len()).map(|_| boot_rng.random_range(0..curves.len())).collect();
            let curve = median_curve(&curves, |t| picks[t], window);
            let logs: Vec<f64> = curve.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
            least_squares_slope(&logs)
        })
        .collect();
    let mean = slopes.iter().sum::<f64>() / resamples as f64;
    let sd = (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt();
    let limit = rho.ln() + tol::C5_SIGMAS * sd;
    verdict(
        slope <= limit,
        format!(
            "{m}x{l}x{n}, {} trials, {window} iterations fitted: median log d^2 slope {slope:.4e} <= log rho {:.4e} + 3 sd {sd:.1e} (gamma {gamma:.3}, rho {rho:.6})",
            tol::C5_TRIALS,
            rho.ln()
        ),
    )
}

fn matrix_config(block: usize, t: f64) -> ExperimentConfig {
    let gen = GenSpec {
        block_size: Some(block),
        ..GenSpec::defaults(Family::MatrixGaussian)
    };
    let mut cfg = ExperimentConfig::new(gen, SolverKind::Bmrk);
    cfg.solver_cfg = SolverConfig::new(tol::C6_ITERS, 600)
        .with_step(StepPolicy::Uniform(t))
        .with_log_stride(50);
    cfg.trials = tol::C6_TRIALS;
    cfg
}

fn median_trials(cfg: &ExperimentConfig) -> Result<Vec<(usize, f64)>> {
    let traces: Vec<RunTrace> = (0..cfg.trials).map(|j| run_trial(cfg, j).map(|r| r.trace)).collect::<Result<_, _>>()?;
    Ok(median_summary(&traces).into_iter().map(|row| (row.iteration, row.median_residual)).collect())
}

fn c6_matrix_orderings() -> Result<Verdict> {
    let configs = [(10, 1.0), (10, 0.2), (10, 1.8), (1, 1.0), (5, 1.5)];
    let mut curves = BTreeMap::new();
    for (block, t) in configs {
        curves.insert((block, (t * 10.0) as u32), median_trials(&matrix_config(block, t))?);
    }
    let get = |block: usize, t10: u32| &curves[&(block, t10)];
    let last = |c: &Vec<(usize, f64)>| c.last().expect("non-empty summary").1;

    let base = get(10, 10);
    let decrease = base[0].1 / last(base);
    let a_ok = decrease >= tol::C6_DECREASE;

    let (slow, fast) = (last(get(10, 2)), last(get(10, 18)));
    let b_ok = fast < slow;

    let classic = get(1, 10);
    let dominating: Vec<String> = [(10, 18), (5, 15)]
        .into_iter()
        .filter(|&(b, t)| {
            let c = get(b, t);
            c.len() == classic.len() && c.iter().zip(classic).skip(1).all(|(x, y)| x.0 == y.0 && x.1 <= y.1)
        })
        .map(|(b, t)| format!("|tau|={b} t={:.1}", t as f64 / 10.0))
        .collect();
    let c_ok = !dominating.is_empty();
    verdict(
        a_ok && b_ok && c_ok,
        format!(
            "(a) decrease x{decrease:.2e} at |tau|=10 t=1; (b) final {fast:.3e} at t=1.8 vs {slow:.3e} at t=0.2; (c) classic RK dominated by [{}]",
            dominating.join(", ")
        ),
    )
}

fn c7_bounds_vs_rows() -> Result<Verdict> {
    let gen = GenSpec::defaults(Family::EqBound);
    let make = |kind| {
        let mut cfg = ExperimentConfig::new(gen.clone(), kind);
        cfg.solver_cfg = SolverConfig::new(tol::C7_ITERS, 700)
            .with_step(StepPolicy::Coefficient(tol::C7_ALPHA))
            .with_log_stride(10);
        cfg.trials = tol::C7_TRIALS;
        cfg
    };
    let rows = median_trials(&make(SolverKind::Trkl))?;
    let bounded = median_trials(&make(SolverKind::Trklb))?;
    let target = rows.last().expect("non-empty summary").1;
    let reached = bounded.iter().find(|(_, v)| *v <= target).map(|(k, _)| *k);
    let detail = match reached {
        Some(k) => format!("TRK-L median at {} iterations {target:.3e}; TRK-LB reaches it at iteration {k}", tol::C7_ITERS),
        None => format!("TRK-L median at {} iterations {target:.3e}; TRK-LB never reaches it", tol::C7_ITERS),
    };
    verdict(reached.is_some_and(|k| k < tol::C7_ITERS), detail)
}

fn c8_bound_invariant() -> Result<Verdict> {
    let gen = GenSpec::defaults(Family::EqBound);
    let (problem, _) = gen_eq_bound(gen.m_eq, gen.l, gen.p, gen.n, 808)?;
    let upper = problem.upper_bound().cloned();
    let lower = problem.lower_bound().cloned();
    ensure!(upper.is_some() || lower.is_some(), "eq_bound problem carries no bounds");
    let x0 = gaussian_tensor(&mut rng(809), gen.l, gen.p, gen.n).scale(10.0);
    let cfg = SolverConfig::new(tol::C8_ITERS, 810).with_log_stride(1);
    let (mut checked, mut violations) = (0usize, 0usize);
    trklb_solve_observed(&problem, &x0, &cfg, &mut |k, x, _| {
        if k == 0 {
            return;
        }
        checked += 1;
        let above = upper.as_ref().is_some_and(|u| x.as_slice().iter().zip(u.as_slice()).any(|(v, b)| v > b));
        let below = lower.as_ref().is_some_and(|lo| x.as_slice().iter().zip(lo.as_slice()).any(|(v, b)| v < b));
        violations += usize::from(above || below);
    })?;
    verdict(
        checked == tol::C8_ITERS && violations == 0,
        format!("{checked} iterates checked, {violations} outside the bounds"),
    )
}

fn psnr_oracle(truth: &Tensor3, x: &Tensor3) -> f64 {
    let mse = diff_norm(truth, x).powi(2) / truth.len() as f64;
    10.0 * (255.0f64 * 255.0 / mse).log10()
}

fn deblur_config(noisy: bool) -> ExperimentConfig {
    let gen = GenSpec {
        l: 64,
        p: 6,
        n: 64,
        noise: noisy.then(NoiseSpec::default),
        ..GenSpec::defaults(Family::Deblur)
    };
    let mut cfg = ExperimentConfig::new(gen, SolverKind::Trklb);
    cfg.solver_cfg = SolverConfig::new(tol::C9_ITERS, 909).with_log_stride(1000);
    cfg.init_std = 88.0;
    cfg
}

fn c9_deblur() -> Result<Verdict> {
    ensure!(DEFAULT_KERNEL_SIZE == 5 && DEFAULT_KERNEL_SIGMA == 2.0, "blur kernel is not 5x5 with sigma 2");
    let noise = NoiseSpec::default();
    ensure!(noise.epsilon == 0.2 && noise.half_width == 0.2, "noise settings differ from 0.2 / [-0.2, 0.2]");
    let inits = [InitKind::Zero, InitKind::Observed, InitKind::Random];

    let exact = run_deblur(&deblur_config(false), &inits)?;
    let base = psnr_oracle(&exact.truth, &exact.observed);
    let mut parts = vec![format!("blurred {base:.2} dB")];
    let mut pass = true;
    for run in &exact.runs {
        let q = psnr_oracle(&exact.truth, &run.solution);
        ensure!((q - run.psnr).abs() <= 1e-9 * q.abs(), "library PSNR disagrees with the oracle");
        let nonneg = run.solution.as_slice().iter().all(|&v| v >= 0.0);
        pass &= q - base >= tol::C9_GAIN_DB && nonneg;
        parts.push(format!("{} {q:.2} dB (+{:.2})", run.init, q - base));
    }

    let noisy = run_deblur(&deblur_config(true), &inits)?;
    for run in &noisy.runs {
        let first = run.trace.initial_residual().context("empty trace")?;
        let last = run.trace.final_residual().context("empty trace")?;
        pass &= first / last >= tol::C9_NOISY_DECREASE;
        parts.push(format!("noisy {} e_T x{:.1}", run.init, first / last));
    }
    verdict(pass, format!("64x64x6 phantom: {}", parts.join(", ")))
}

/// Drops the `elapsed_seconds` column from CSV text.
fn strip_elapsed(text: &str) -> String {
    let mut drop = None;
    let mut out = String::new();
    for line in text.lines() {
        if line.starts_with('#') {
            out.push_str(line);
        } else {
            let fields: Vec<&str> = line.split(',').collect();
            if drop.is_none() {
                drop = Some(fields.iter().position(|f| *f == "elapsed_seconds"));
            }
            let kept: Vec<&str> = fields
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != drop.flatten())
                .map(|(_, f)| *f)
                .collect();
            out.push_str(&kept.join(","));
        }
        out.push('\n');
    }
    out
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let bytes = fs::read(&path)?;
            let bytes = if path.extension().is_some_and(|e| e == "csv") {
                strip_elapsed(&String::from_utf8(bytes)?).into_bytes()
            } else {
                bytes
            };
            files.insert(path.strip_prefix(dir)?.display().to_string(), bytes);
        }
    }
    Ok(files)
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>> {
    let out = Command::new(env!("CARGO_BIN_EXE_tenkacz")).args(args).current_dir(dir).output()?;
    ensure!(
        out.status.success(),
        "`tenkacz {}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(out.stdout)
}

fn c10_cli_determinism() -> Result<Verdict> {
    let small = ["--m-eq", "6", "--m-ineq", "4", "--l", "5", "--p", "2", "--n", "4", "--seed", "11"];
    let with = |head: &[&str], tail: &[&str]| -> Vec<String> {
        head.iter().chain(tail).map(|s| s.to_string()).collect()
    };
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("gen", with(&["gen", "--family", "tensor_gaussian", "--out", "p"], &small)),
        ("trkl", with(&["trkl", "--family", "tensor_gaussian", "--trials", "3", "--max-iters", "300", "--out", "o"], &small)),
        ("bmrk", with(&["bmrk", "--family", "matrix_gaussian", "--block-size", "2", "--trials", "2", "--max-iters", "300", "--out", "o"], &small)),
        ("trklb", with(&["trklb", "--family", "eq_bound", "--trials", "2", "--max-iters", "300", "--out", "o"], &small)),
        ("deblur", with(&["deblur", "--height", "12", "--width", "10", "--frames", "2", "--max-iters", "400", "--log-stride", "20", "--out", "o"], &[])),
        ("deblur --noisy", with(&["deblur", "--noisy", "--height", "12", "--width", "10", "--frames", "2", "--max-iters", "400", "--out", "o"], &[])),
        ("selftest", with(&["selftest", "--seed", "5"], &[])),
    ];
    let mut differing = Vec::new();
    for (name, args) in &commands {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let mut results = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir()?;
            let stdout = run_cli(dir.path(), &args)?;
            let mut files = snapshot(dir.path())?;
            if *name == "trkl" {
                let rate = run_cli(dir.path(), &["rate", "o/trial_000.csv"])?;
                files.insert("<rate stdout>".into(), rate);
            }
            results.push((stdout, files));
        }
        if results[0] != results[1] {
            differing.push(name.to_string());
        }
        if results[0].1.is_empty() && *name != "selftest" {
            return Err(anyhow!("`{name}` wrote no files"));
        }
    }
    verdict(
        differing.is_empty(),
        format!(
            "{} subcommand runs repeated (rate included); differing: [{}]",
            commands.len(),
            differing.join(", ")
        ),
    )
}
