//! CSV traces: `#`-prefixed `key=value` metadata lines, then the header
//! `iteration,elapsed_seconds,residual` and one row per logged iteration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::HarnessError;
use crate::solvers::{RunTrace, TraceMeta, TracePoint};

pub const HEADER: &str = "iteration,elapsed_seconds,residual";

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn format_trace(trace: &RunTrace) -> String {
    let m = &trace.meta;
    let mut out = String::new();
    let (dm, dl, dp, dn) = m.dims;
    let _ = writeln!(out, "# solver={}", m.solver);
    let _ = writeln!(out, "# dims={dm},{dl},{dp},{dn}");
    let _ = writeln!(out, "# seed={}", m.seed);
    let _ = writeln!(out, "# max_iters={}", m.max_iters);
    let _ = writeln!(out, "# residual_tol={}", m.residual_tol);
    let _ = writeln!(out, "# log_stride={}", m.log_stride);
    let _ = writeln!(out, "# step_policy={}", m.step_policy);
    let _ = writeln!(out, "# steps={}", join(&m.steps));
    for w in &m.warnings {
        let _ = writeln!(out, "# warning={}", w.replace('\n', " "));
    }
    out.push_str(HEADER);
    out.push('\n');
    for p in &trace.points {
        let _ = writeln!(out, "{},{},{}", p.iteration, p.elapsed_seconds, p.residual);
    }
    out
}

pub fn write_trace(path: impl AsRef<Path>, trace: &RunTrace) -> Result<(), HarnessError> {
    let path = path.as_ref();
    if let Some(p) = trace.points.iter().find(|p| !p.residual.is_finite()) {
        return Err(HarnessError::TraceFile {
            path: path.to_path_buf(),
            reason: format!("non-finite residual at iteration {}", p.iteration),
        });
    }
    fs::write(path, format_trace(trace)).map_err(|e| HarnessError::io(path, e))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<RunTrace, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_trace(&text, path)
}

pub fn parse_trace(text: &str, path: &Path) -> Result<RunTrace, HarnessError> {
    let bad = |reason: String| HarnessError::TraceFile {
        path: path.to_path_buf(),
        reason,
    };
    let mut meta = TraceMeta::default();
    for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
        let Some((key, value)) = line.trim().split_once('=') else {
            continue;
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad(format!("bad number `{v}` in `{key}`")));
        let int = |v: &str| v.trim().parse::<u64>().map_err(|_| bad(format!("bad integer `{v}` in `{key}`")));
        match key.trim() {
            "solver" => meta.solver = value.to_string(),
            "dims" => {
                let d = value.split(',').map(int).collect::<Result<Vec<_>, _>>()?;
                if d.len() != 4 {
                    return Err(bad(format!("dims needs 4 values, got {}", d.len())));
                }
                meta.dims = (d[0] as usize, d[1] as usize, d[2] as usize, d[3] as usize);
            }
            "seed" => meta.seed = int(value)?,
            "max_iters" => meta.max_iters = int(value)? as usize,
            "residual_tol" => meta.residual_tol = num(value)?,
            "log_stride" => meta.log_stride = int(value)? as usize,
            "step_policy" => meta.step_policy = value.to_string(),
            "steps" if value.trim().is_empty() => meta.steps.clear(),
            "steps" => meta.steps = value.split(',').map(num).collect::<Result<_, _>>()?,
            "warning" => meta.warnings.push(value.to_string()),
            _ => {}
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER.split(',').collect::<Vec<_>>() {
        return Err(bad(format!("expected header `{HEADER}`")));
    }
    let mut points = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| bad(format!("row {}: missing column {i}", row + 1)));
        let iteration = field(0)?
            .parse::<usize>()
            .map_err(|_| bad(format!("row {}: bad iteration", row + 1)))?;
        let elapsed_seconds = field(1)?
            .parse::<f64>()
            .map_err(|_| bad(format!("row {}: bad elapsed_seconds", row + 1)))?;
        let residual = field(2)?
            .parse::<f64>()
            .map_err(|_| bad(format!("row {}: bad residual", row + 1)))?;
        if !residual.is_finite() {
            return Err(bad(format!("row {}: residual must be finite", row + 1)));
        }
        points.push(TracePoint {
            iteration,
            elapsed_seconds,
            residual,
        });
    }
    Ok(RunTrace { meta, points })
}
