//! Runtime oracle checks behind the `selftest` subcommand.

use rand::{Rng, SeedableRng};

use crate::feasibility::{step_bounds, ConstraintPartition, FeasibilityProblem, RowPaving};
use crate::fourier::{dft_tubes, tprod_fft};
use crate::generators::{gaussian_tensor, gen_eq_bound};
use crate::solvers::{bmrk_step, trkl_step, trklb_solve_observed, SolverConfig, SolverRng};
use crate::tensor::{bcirc, fold, inner, t_transpose, tprod_naive, unfold, Tensor3};

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failure: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

type Suite = fn(&mut SolverRng) -> Result<usize, String>;

const SUITES: [(&str, Suite); 8] = [
    ("tprod_fft_matches_naive", tprod_equivalence),
    ("fourier_norm_identity", fourier_norm),
    ("adjoint_identity", adjoint),
    ("bcirc_transpose", bcirc_transpose),
    ("product_norm_bound", product_norm),
    ("step_bound_range", step_bound_range),
    ("trkl_matrix_form", trkl_matrix_form),
    ("trklb_bound_invariant", trklb_bounds),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

/// Runs every suite from `seed`; each suite gets its own stream.
pub fn run_selftest(seed: u64) -> Vec<SuiteResult> {
    SUITES
        .iter()
        .enumerate()
        .map(|(k, (name, suite))| {
            let mut rng = SolverRng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            match suite(&mut rng) {
                Ok(cases) => SuiteResult {
                    name,
                    cases,
                    failure: None,
                },
                Err(msg) => SuiteResult {
                    name,
                    cases: 0,
                    failure: Some(msg),
                },
            }
        })
        .collect()
}

fn dims(rng: &mut SolverRng) -> (usize, usize, usize, usize) {
    (rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(1..=8))
}

fn frob(t: &Tensor3) -> f64 {
    t.frob_norm_sq().sqrt()
}

fn tprod_equivalence(rng: &mut SolverRng) -> Result<usize, String> {
    let cases = 60;
    for c in 0..cases {
        let (m, l, p, n) = dims(rng);
        let a = gaussian_tensor(rng, m, l, n);
        let x = gaussian_tensor(rng, l, p, n);
        let naive = tprod_naive(&a, &x).map_err(|e| e.to_string())?;
        let fast = tprod_fft(&dft_tubes(&a), &x).map_err(|e| e.to_string())?;
        let err = frob(&fast.sub(&naive).map_err(|e| e.to_string())?);
        if err > 1e-10 * (1.0 + frob(&naive)) {
            return Err(format!("case {c} ({m},{l},{p},{n}): error {err:e}"));
        }
    }
    Ok(cases)
}

fn fourier_norm(rng: &mut SolverRng) -> Result<usize, String> {
    let cases = 100;
    for c in 0..cases {
        let (m, l, _, n) = dims(rng);
        let a = gaussian_tensor(rng, m, l, n);
        let lhs = dft_tubes(&a).frob_norm_sq();
        let rhs = n as f64 * a.frob_norm_sq();
        if (lhs - rhs).abs() > 1e-12 * rhs.max(1.0) {
            return Err(format!("case {c}: {lhs} vs {rhs}"));
        }
    }
    Ok(cases)
}

fn adjoint(rng: &mut SolverRng) -> Result<usize, String> {
    let cases = 100;
    for c in 0..cases {
        let (m, l, p, n) = dims(rng);
        let a = gaussian_tensor(rng, m, l, n);
        let x = gaussian_tensor(rng, l, p, n);
        let b = gaussian_tensor(rng, m, p, n);
        let lhs = inner(&tprod_naive(&a, &x).map_err(|e| e.to_string())?, &b).map_err(|e| e.to_string())?;
        let rhs = inner(&x, &tprod_naive(&t_transpose(&a), &b).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let scale = frob(&a) * frob(&x) * frob(&b);
        if (lhs - rhs).abs() > 1e-12 * (1.0 + scale) {
            return Err(format!("case {c}: {lhs} vs {rhs}"));
        }
    }
    Ok(cases)
}

fn bcirc_transpose(rng: &mut SolverRng) -> Result<usize, String> {
    let cases = 100;
    for c in 0..cases {
        let (m, l, _, n) = dims(rng);
        let a = gaussian_tensor(rng, m, l, n);
        if bcirc(&t_transpose(&a)) != bcirc(&a).transpose() {
            return Err(format!("case {c}: bcirc(A^T) != bcirc(A)^T"));
        }
    }
    Ok(cases)
}

fn product_norm(rng: &mut SolverRng) -> Result<usize, String> {
    let cases = 100;
    for c in 0..cases {
        let (m, l, p, n) = dims(rng);
        let a = gaussian_tensor(rng, m, l, n);
        let x = gaussian_tensor(rng, l, p, n);
        let a_hat = dft_tubes(&a);
        let lhs = frob(&tprod_naive(&a, &x).map_err(|e| e.to_string())?);
        let peak = (0..n).map(|k| a_hat.slice_spectral_norm(k)).fold(0.0, f64::max);
        let tight = peak * frob(&x);
        let loose = (n as f64).sqrt() * frob(&a) * frob(&x);
        if lhs > tight * (1.0 + 1e-8) || tight > loose * (1.0 + 1e-12) {
            return Err(format!("case {c}: {lhs} <= {tight} <= {loose} fails"));
        }
    }
    Ok(cases)
}

fn step_bound_range(rng: &mut SolverRng) -> Result<usize, String> {
    let cases = 120;
    for c in 0..cases {
        let (_, l, _, n) = dims(rng);
        let a = gaussian_tensor(rng, 1, l, n);
        let b = step_bounds(&dft_tubes(&a)).map_err(|e| e.to_string())?.per_row[0];
        let lo = 2.0 / n as f64;
        if b < lo - 1e-12 || b > 2.0 + 1e-12 {
            return Err(format!("case {c}: bound {b} outside [{lo}, 2]"));
        }
    }
    Ok(cases)
}

fn trkl_matrix_form(rng: &mut SolverRng) -> Result<usize, String> {
    let cases = 50;
    for c in 0..cases {
        let (m, l, p, n) = dims(rng);
        let a = gaussian_tensor(rng, m, l, n);
        let x = gaussian_tensor(rng, l, p, n);
        let b = gaussian_tensor(rng, m, p, n);
        let ineq: Vec<usize> = (0..m).filter(|_| rng.random::<bool>()).collect();
        let part = ConstraintPartition::new(m, &ineq).map_err(|e| e.to_string())?;
        let problem = FeasibilityProblem::new(a.clone(), b.clone(), part).map_err(|e| e.to_string())?;
        let i = rng.random_range(0..m);
        let t = rng.random_range(0.1..1.9);
        let got = trkl_step(&problem, &x, i, t).map_err(|e| e.to_string())?;
        let a_i = a.select_rows(&[i]).map_err(|e| e.to_string())?;
        let b_i = b.select_rows(&[i]).map_err(|e| e.to_string())?;
        let mut r = unfold(&tprod_naive(&a_i, &x).map_err(|e| e.to_string())?) - unfold(&b_i);
        if ineq.contains(&i) {
            r.apply(|v| *v = v.max(0.0));
        }
        let alpha = t / a_i.frob_norm_sq();
        let want_mat = unfold(&x) - bcirc(&a_i).transpose() * r * alpha;
        let want = fold(&want_mat, n).map_err(|e| e.to_string())?;
        let err = frob(&got.sub(&want).map_err(|e| e.to_string())?);
        if err > 1e-12 * (1.0 + frob(&want)) {
            return Err(format!("case {c}: error {err:e}"));
        }
        if n == 1 {
            let blocks: Vec<Vec<usize>> = ineq.iter().copied().chain((0..m).filter(|r| !ineq.contains(r))).map(|r| vec![r]).collect();
            let pos = blocks.iter().position(|bk| bk[0] == i).expect("row present");
            let paving = RowPaving::new(blocks, ineq.len()).map_err(|e| e.to_string())?;
            let paved = problem.clone().with_paving(paving).map_err(|e| e.to_string())?;
            if bmrk_step(&paved, &x, pos, t).map_err(|e| e.to_string())? != got {
                return Err(format!("case {c}: B-MRK and TRK-L differ at n = 1"));
            }
        }
    }
    Ok(cases)
}

fn trklb_bounds(rng: &mut SolverRng) -> Result<usize, String> {
    let seed = rng.random();
    let (problem, _) = gen_eq_bound(12, 5, 2, 4, seed).map_err(|e| e.to_string())?;
    let ub = problem.upper_bound().expect("eq_bound has an upper bound").clone();
    let mut checked = 0;
    let mut violation = None;
    let x0 = gaussian_tensor(rng, 5, 2, 4).scale(5.0);
    let cfg = SolverConfig::new(2000, seed).with_log_stride(1);
    trklb_solve_observed(&problem, &x0, &cfg, &mut |k, x, _| {
        if k == 0 {
            return;
        }
        checked += 1;
        if violation.is_none() && x.as_slice().iter().zip(ub.as_slice()).any(|(v, u)| v > u) {
            violation = Some(k);
        }
    })
    .map_err(|e| e.to_string())?;
    match violation {
        Some(k) => Err(format!("iterate {k} exceeds the upper bound")),
        None => Ok(checked),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for r in run_selftest(2024) {
            assert!(r.passed(), "{}: {:?}", r.name, r.failure);
            assert!(r.cases > 0);
        }
    }
}
