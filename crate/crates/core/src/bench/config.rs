//! Run configuration. Files are TOML with one table per concern:
//!
//! ```toml
//! [run]
//! command = "sweep-direct"
//! out = "sweep.csv"
//!
//! [problem]
//! id = "harmonic"
//! theta = 0.2
//!
//! [sweep]
//! eps_min = 1e-15
//! eps_max = 0.1
//! eps_count = 29
//! ```
//!
//! Every field has a default, so any subset of tables and keys may appear.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{catalog, ProblemCatalogEntry, ProblemId};
use crate::solvers::{Method, NormMode, SolverConfig};

use super::methods::GradientMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SweepDirect,
    CompareAdjoints,
    Gradcheck,
    Fit,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::SweepDirect => "sweep-direct",
            Command::CompareAdjoints => "compare-adjoints",
            Command::Gradcheck => "gradcheck",
            Command::Fit => "fit",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Command::SweepDirect,
            Command::CompareAdjoints,
            Command::Gradcheck,
            Command::Fit,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub problem: ProblemSection,
    pub sweep: SweepSection,
    pub solver: SolverSection,
    pub fit: FitSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub command: Option<Command>,
    /// CSV destination; standard output when absent.
    pub out: Option<PathBuf>,
    /// Method labels; empty selects the command's default set.
    pub methods: Vec<String>,
    /// Seed for randomized checks. The current commands are deterministic
    /// and never draw from it.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    /// Catalog id. `gradcheck` runs every problem when absent.
    pub id: Option<String>,
    pub theta: Option<f64>,
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_count: usize,
    /// Solver tolerances for the solver-mode rows.
    pub tolerances: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            eps_min: 1e-15,
            eps_max: 1e-1,
            eps_count: 29,
            tolerances: vec![1e-6, 1e-12],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// `dp5`, `rk4` or `euler`.
    pub method: String,
    pub abstol: f64,
    pub reltol: f64,
    /// Fixed step; defaults to the problem's own step for fixed methods.
    pub dt: Option<f64>,
    pub max_steps: usize,
    /// `joint` or `primal-only`.
    pub norm: String,
    pub checkpoints: Option<usize>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            method: "dp5".into(),
            abstol: 1e-12,
            reltol: 1e-12,
            dt: None,
            max_steps: 1_000_000,
            norm: "joint".into(),
            checkpoints: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub alpha: f64,
    pub iterations: usize,
    pub gtol: f64,
    /// Parameter that generates the synthetic data.
    pub theta_star: f64,
    pub method: String,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            iterations: 5000,
            gtol: 1e-8,
            theta_star: 0.3,
            method: "ForwardSensitivity".into(),
        }
    }
}

pub fn parse_norm(s: &str) -> Result<NormMode> {
    match s.to_ascii_lowercase().as_str() {
        "joint" | "joint-primal-dual" | "jointprimaldual" => Ok(NormMode::JointPrimalDual),
        "primal" | "primal-only" | "primalonly" => Ok(NormMode::PrimalOnly),
        _ => Err(Error::Config(format!("unknown norm mode `{s}`"))),
    }
}

/// `count` points spaced evenly in `log10` from `min` to `max`.
pub fn log_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && min < max && max.is_finite()) || count < 2 {
        return Err(Error::Config(format!(
            "epsilon grid needs 0 < min < max and count >= 2, got [{min}, {max}] x {count}"
        )));
    }
    let (a, b) = (min.log10(), max.log10());
    let h = (b - a) / (count - 1) as f64;
    Ok((0..count)
        .map(|k| {
            if k + 1 == count {
                max
            } else {
                10f64.powf(a + h * k as f64)
            }
        })
        .collect())
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn problem_id(&self) -> Result<Option<ProblemId>> {
        self.problem.id.as_deref().map(str::parse).transpose()
    }

    pub fn entry(&self, id: ProblemId) -> Result<ProblemCatalogEntry> {
        catalog(id, self.problem.theta, self.problem.grid)
    }

    pub fn methods(&self) -> Result<Vec<GradientMethod>> {
        self.run.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn norm_mode(&self) -> Result<NormMode> {
        parse_norm(&self.solver.norm)
    }

    pub fn eps_grid(&self) -> Result<Vec<f64>> {
        log_grid(self.sweep.eps_min, self.sweep.eps_max, self.sweep.eps_count)
    }

    /// The configured solver. Fixed-step methods without a `dt` take the
    /// problem's default step.
    pub fn solver_config(&self, entry: &ProblemCatalogEntry) -> Result<SolverConfig> {
        let method: Method = self.solver.method.parse()?;
        let dt = match self.solver.dt {
            None if !method.is_adaptive() => Some(entry.default_dt),
            dt => dt,
        };
        let cfg = SolverConfig {
            method,
            dt,
            abstol: self.solver.abstol,
            reltol: self.solver.reltol,
            max_steps: self.solver.max_steps,
            norm_mode: self.norm_mode()?,
            checkpoints: self.solver.checkpoints,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fixed RK4 solver for the discrete adjoint: the configured solver if
    /// it is already fixed-step, otherwise RK4 at the configured or default
    /// step.
    pub fn fixed_solver_config(&self, entry: &ProblemCatalogEntry) -> Result<SolverConfig> {
        let cfg = self.solver_config(entry)?;
        if !cfg.method.is_adaptive() {
            return Ok(cfg);
        }
        Ok(SolverConfig {
            method: Method::Rk4,
            dt: Some(self.solver.dt.unwrap_or(entry.default_dt)),
            ..cfg
        })
    }

    /// Checks everything that can be checked without running a command.
    pub fn validate(&self) -> Result<()> {
        if self.run.command.is_none() {
            return Err(Error::Config("no command given".into()));
        }
        self.eps_grid()?;
        if self.sweep.tolerances.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Config("sweep tolerances must be positive".into()));
        }
        self.problem_id()?;
        self.methods()?;
        self.norm_mode()?;
        self.solver.method.parse::<Method>()?;
        self.fit.method.parse::<GradientMethod>()?;
        if !(self.fit.alpha >= 0.0) || !(self.fit.gtol >= 0.0) {
            return Err(Error::Config("fit alpha and gtol must be non-negative".into()));
        }
        Ok(())
    }
}
