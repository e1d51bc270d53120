//! A problem on disk: a directory with `op.t3d`, `rhs.t3d`, optional
//! `upper.t3d`, `lower.t3d`, `witness.t3d`, and a `problem.meta` text file
//! listing the inequality rows and the paving.
//!
//! `problem.meta` lines are `key=value`:
//!
//! ```text
//! ineq_rows=500..1200
//! blocks=500..510;510..520;...
//! ineq_blocks=70
//! ```
//!
//! Index lists are comma-separated half-open ranges `a..b` or single indices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::HarnessError;
use crate::feasibility::{ConstraintPartition, FeasibilityProblem, RowPaving};
use crate::tensor::Tensor3;

use super::tensor_file::{read_tensor, write_tensor};

pub const META_FILE: &str = "problem.meta";

pub fn format_indices(idx: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && idx[j] == idx[j - 1] + 1 {
            j += 1;
        }
        if j - i == 1 {
            parts.push(idx[i].to_string());
        } else {
            parts.push(format!("{}..{}", idx[i], idx[j - 1] + 1));
        }
        i = j;
    }
    parts.join(",")
}

pub fn parse_indices(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
                let b: usize = b.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
                if b <= a {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(a..b);
            }
            None => out.push(part.parse().map_err(|_| format!("bad index `{part}`"))?),
        }
    }
    Ok(out)
}

pub fn write_problem(dir: impl AsRef<Path>, problem: &FeasibilityProblem, witness: Option<&Tensor3>) -> Result<(), HarnessError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_tensor(dir.join("op.t3d"), problem.op())?;
    write_tensor(dir.join("rhs.t3d"), problem.rhs())?;
    for (name, t) in [
        ("upper.t3d", problem.upper_bound()),
        ("lower.t3d", problem.lower_bound()),
        ("witness.t3d", witness),
    ] {
        let path = dir.join(name);
        match t {
            Some(t) => write_tensor(&path, t)?,
            None if path.exists() => fs::remove_file(&path).map_err(|e| HarnessError::io(&path, e))?,
            None => {}
        }
    }
    let mut meta = String::new();
    let _ = writeln!(meta, "ineq_rows={}", format_indices(problem.partition().ineq_rows()));
    if let Some(paving) = problem.paving() {
        let blocks: Vec<String> = paving.blocks().iter().map(|b| format_indices(b)).collect();
        let _ = writeln!(meta, "blocks={}", blocks.join(";"));
        let _ = writeln!(meta, "ineq_blocks={}", paving.ineq_block_count());
    }
    let path = dir.join(META_FILE);
    fs::write(&path, meta).map_err(|e| HarnessError::io(&path, e))
}

/// Reads a problem directory; returns the problem and the witness if present.
pub fn read_problem(dir: impl AsRef<Path>) -> Result<(FeasibilityProblem, Option<Tensor3>), HarnessError> {
    let dir = dir.as_ref();
    let op = read_tensor(dir.join("op.t3d"))?;
    let rhs = read_tensor(dir.join("rhs.t3d"))?;
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| HarnessError::io(&meta_path, e))?;
    let mut ineq = Vec::new();
    let mut blocks: Option<Vec<Vec<usize>>> = None;
    let mut ineq_blocks = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| HarnessError::Config {
            path: meta_path.clone(),
            line: lineno + 1,
            reason,
        };
        let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key=value".into()))?;
        match key.trim() {
            "ineq_rows" => ineq = parse_indices(value).map_err(bad)?,
            "blocks" => {
                blocks = Some(
                    value
                        .split(';')
                        .map(parse_indices)
                        .collect::<Result<_, _>>()
                        .map_err(bad)?,
                )
            }
            "ineq_blocks" => ineq_blocks = value.trim().parse().map_err(|_| bad(format!("bad count `{value}`")))?,
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    let partition = ConstraintPartition::new(op.dims().0, &ineq)?;
    let mut problem = FeasibilityProblem::new(op, rhs, partition)?;
    if let Some(blocks) = blocks {
        problem = problem.with_paving(RowPaving::new(blocks, ineq_blocks)?)?;
    }
    let optional = |name: &str| -> Result<Option<Tensor3>, HarnessError> {
        let path = dir.join(name);
        if path.exists() {
            read_tensor(path).map(Some)
        } else {
            Ok(None)
        }
    };
    if let Some(ub) = optional("upper.t3d")? {
        problem = problem.with_upper_bound(ub)?;
    }
    if let Some(lb) = optional("lower.t3d")? {
        problem = problem.with_lower_bound(lb)?;
    }
    let witness = optional("witness.t3d")?;
    Ok((problem, witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_eq_bound, gen_matrix_gaussian};

    #[test]
    fn index_lists() {
        let idx = vec![0, 1, 2, 5, 7, 8];
        let s = format_indices(&idx);
        assert_eq!(s, "0..3,5,7..9");
        assert_eq!(parse_indices(&s).unwrap(), idx);
        assert_eq!(parse_indices("").unwrap(), Vec::<usize>::new());
        assert!(parse_indices("3..3").is_err());
        assert!(parse_indices("x").is_err());
    }

    #[test]
    fn round_trip_paved_and_bounded() {
        let dir = tempfile::tempdir().unwrap();
        let (p, x) = gen_matrix_gaussian(5, 6, 4, 2, 4, 1).unwrap();
        write_problem(dir.path(), &p, Some(&x)).unwrap();
        let (q, w) = read_problem(dir.path()).unwrap();
        assert_eq!(q.op(), p.op());
        assert_eq!(q.rhs(), p.rhs());
        assert_eq!(q.partition(), p.partition());
        assert_eq!(q.paving(), p.paving());
        assert_eq!(w.as_ref(), Some(&x));

        let (p, _) = gen_eq_bound(3, 2, 2, 3, 2).unwrap();
        write_problem(dir.path(), &p, None).unwrap();
        let (q, w) = read_problem(dir.path()).unwrap();
        assert_eq!(q.upper_bound(), p.upper_bound());
        assert!(q.paving().is_none());
        assert!(w.is_none());
    }
}
