//! Plain-text experiment configuration.
//!
//! One `key = value` per line; `#` starts a comment. Unknown keys are errors
//! and relative paths resolve against the config file's directory.
//!
//! ```text
//! family = tensor_gaussian
//! m_eq = 50
//! m_ineq = 70
//! l = 50
//! p = 7
//! n = 10
//! solver = trkl
//! alpha = 1.8
//! max_iters = 5000
//! trials = 10
//! output_dir = out/fig3
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::HarnessError;
use crate::generators::{Family, GenSpec, NoiseSpec, DEFAULT_EPSILON, DEFAULT_NOISE_HALF_WIDTH};
use crate::solvers::{SolverConfig, StepPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Bmrk,
    Trkl,
    Trklb,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Bmrk => "bmrk",
            SolverKind::Trkl => "trkl",
            SolverKind::Trklb => "trklb",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bmrk" => Ok(SolverKind::Bmrk),
            "trkl" => Ok(SolverKind::Trkl),
            "trklb" => Ok(SolverKind::Trklb),
            other => Err(format!("unknown solver `{other}` (expected bmrk, trkl or trklb)")),
        }
    }
}

/// Starting point of every trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitKind {
    #[default]
    Zero,
    /// The observed right-hand side (deblurring only: the blurred stack).
    Observed,
    /// iid `N(0, init_std^2)` entries.
    Random,
}

impl FromStr for InitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(InitKind::Zero),
            "observed" | "blurred" => Ok(InitKind::Observed),
            "random" => Ok(InitKind::Random),
            other => Err(format!("unknown init `{other}` (expected zero, blurred or random)")),
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitKind::Zero => "zero",
            InitKind::Observed => "blurred",
            InitKind::Random => "random",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub gen: GenSpec,
    pub solver: SolverKind,
    pub solver_cfg: SolverConfig,
    pub trials: usize,
    pub output_dir: PathBuf,
    pub init: InitKind,
    pub init_std: f64,
    /// Deblurring input: a `.pgm` frame or a `.t3d` stack. The phantom is
    /// used when absent.
    pub image: Option<PathBuf>,
    /// Load this problem directory instead of generating one.
    pub problem: Option<PathBuf>,
    /// Generate the problem once from `seed` instead of once per trial.
    pub fixed_problem: bool,
}

impl ExperimentConfig {
    pub fn new(gen: GenSpec, solver: SolverKind) -> Self {
        let seed = gen.seed;
        Self {
            gen,
            solver,
            solver_cfg: SolverConfig {
                seed,
                ..SolverConfig::default()
            },
            trials: 1,
            output_dir: PathBuf::from("out"),
            init: InitKind::Zero,
            init_std: 1.0,
            image: None,
            problem: None,
            fixed_problem: false,
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, path)
    }

    /// Parses config text; `base` anchors relative paths and `origin` names
    /// the source in error messages.
    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self, HarnessError> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Config {
                path: origin.to_path_buf(),
                line: idx + 1,
                reason: format!("expected key = value, got `{line}`"),
            })?;
            let key = k.trim().to_string();
            if let Some((first, _, _)) = entries.iter().find(|(_, seen, _)| *seen == key) {
                return Err(HarnessError::Config {
                    path: origin.to_path_buf(),
                    line: idx + 1,
                    reason: format!("duplicate key `{key}` (first on line {first})"),
                });
            }
            entries.push((idx + 1, key, v.trim().to_string()));
        }
        let err = |line: usize, reason: String| HarnessError::Config {
            path: origin.to_path_buf(),
            line,
            reason,
        };
        let family = match entries.iter().find(|(_, k, _)| k == "family") {
            Some((line, _, v)) => v.parse::<Family>().map_err(|e| err(*line, e.to_string()))?,
            None => return Err(err(0, "missing required key `family`".into())),
        };
        let solver = match entries.iter().find(|(_, k, _)| k == "solver") {
            Some((line, _, v)) => v.parse::<SolverKind>().map_err(|e| err(*line, e))?,
            None => match family {
                Family::MatrixGaussian | Family::Classification => SolverKind::Bmrk,
                Family::EqBound => SolverKind::Trklb,
                Family::TensorGaussian | Family::Deblur => SolverKind::Trkl,
            },
        };
        let mut cfg = Self::new(GenSpec::defaults(family), solver);
        let mut alpha = None;
        let mut step = None;
        let mut noisy = false;
        let mut noise = NoiseSpec {
            epsilon: DEFAULT_EPSILON,
            half_width: DEFAULT_NOISE_HALF_WIDTH,
        };
        for (line, key, value) in &entries {
            let line = *line;
            let usize_v = || value.parse::<usize>().map_err(|_| err(line, format!("`{key}` needs a nonnegative integer, got `{value}`")));
            let f64_v = || value.parse::<f64>().map_err(|_| err(line, format!("`{key}` needs a number, got `{value}`")));
            let bool_v = || match value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(err(line, format!("`{key}` needs true or false, got `{value}`"))),
            };
            let path_v = || {
                let p = PathBuf::from(value);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            };
            match key.as_str() {
                "family" | "solver" => {}
                "m_eq" => cfg.gen.m_eq = usize_v()?,
                "m_ineq" => cfg.gen.m_ineq = usize_v()?,
                "m" => match family {
                    Family::EqBound => cfg.gen.m_eq = usize_v()?,
                    Family::Classification => cfg.gen.m_ineq = usize_v()?,
                    _ => return Err(err(line, format!("`m` is not used by {family}; set m_eq and m_ineq"))),
                },
                "l" => cfg.gen.l = usize_v()?,
                "p" => cfg.gen.p = usize_v()?,
                "n" => cfg.gen.n = usize_v()?,
                "block_size" => cfg.gen.block_size = Some(usize_v()?),
                "seed" => {
                    let s = value.parse::<u64>().map_err(|_| err(line, format!("bad seed `{value}`")))?;
                    cfg.gen.seed = s;
                    cfg.solver_cfg.seed = s;
                }
                "alpha" => alpha = Some(f64_v()?),
                "step" => step = Some(f64_v()?),
                "max_iters" => cfg.solver_cfg.max_iters = usize_v()?,
                "residual_tol" => cfg.solver_cfg.residual_tol = f64_v()?,
                "log_stride" => cfg.solver_cfg.log_stride = usize_v()?,
                "trials" => cfg.trials = usize_v()?,
                "output_dir" => cfg.output_dir = path_v(),
                "noisy" => noisy = bool_v()?,
                "epsilon" => noise.epsilon = f64_v()?,
                "noise" => noise.half_width = f64_v()?,
                "init" => cfg.init = value.parse().map_err(|e| err(line, e))?,
                "init_std" => cfg.init_std = f64_v()?,
                "image" => cfg.image = Some(path_v()),
                "problem" => cfg.problem = Some(path_v()),
                "fixed_problem" => cfg.fixed_problem = bool_v()?,
                other => return Err(err(line, format!("unknown key `{other}`"))),
            }
        }
        cfg.solver_cfg.step = match (alpha, step) {
            (Some(_), Some(_)) => return Err(err(0, "set at most one of `alpha` and `step`".into())),
            (Some(a), None) => StepPolicy::Coefficient(a),
            (None, Some(t)) => StepPolicy::Uniform(t),
            (None, None) => StepPolicy::Default,
        };
        if noisy {
            cfg.gen.noise = Some(noise);
        }
        cfg.validate().map_err(|reason| err(0, reason))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if self.solver_cfg.log_stride == 0 {
            return Err("log_stride must be positive".into());
        }
        if !(self.init_std >= 0.0) {
            return Err("init_std must be nonnegative".into());
        }
        if self.init == InitKind::Observed && self.gen.family != Family::Deblur {
            return Err("init = blurred needs family = deblur".into());
        }
        if self.solver == SolverKind::Bmrk && !matches!(self.gen.family, Family::MatrixGaussian | Family::Classification) && self.problem.is_none() {
            return Err(format!("bmrk runs on matrix families, not {}", self.gen.family));
        }
        Ok(())
    }
}
