//! Reverse-mode gradients: the discrete adjoint of the solver's step map
//! and the continuous adjoint in three variants.
//!
//! | variant | `u(t)` in the reverse pass | gradient integral |
//! |---|---|---|
//! | `ContinuousBacksolve` | integrated backwards with `λ` | co-integrated |
//! | `ContinuousInterpolating` | forward dense output or checkpoints | co-integrated |
//! | `ContinuousQuadrature` | forward dense output or checkpoints | Gauss–Legendre per reverse step |

mod continuous;
mod discrete;
mod quadrature;
pub(crate) mod storage;

pub use continuous::{adjoint_rhs, continuous_adjoint};
pub use discrete::{discrete_adjoint, step_vjp};
pub use quadrature::{gauss_legendre, gauss_legendre_rule};

use crate::error::{Error, Result};
use crate::problem::{LossSpec, OdeProblem, SensitivityResult};
use crate::solvers::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdjointVariant {
    Discrete,
    ContinuousBacksolve,
    ContinuousInterpolating,
    ContinuousQuadrature,
}

impl AdjointVariant {
    pub const ALL: [AdjointVariant; 4] = [
        AdjointVariant::Discrete,
        AdjointVariant::ContinuousBacksolve,
        AdjointVariant::ContinuousInterpolating,
        AdjointVariant::ContinuousQuadrature,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AdjointVariant::Discrete => "DiscreteAdjoint",
            AdjointVariant::ContinuousBacksolve => "ContinuousBacksolve",
            AdjointVariant::ContinuousInterpolating => "ContinuousInterpolating",
            AdjointVariant::ContinuousQuadrature => "ContinuousQuadrature",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointConfig {
    pub variant: AdjointVariant,
    /// Forward solve.
    pub solver_config: SolverConfig,
    /// Reverse solve; defaults to the forward settings.
    pub reverse: Option<SolverConfig>,
    /// Uniform checkpoints instead of full forward storage.
    pub checkpoints: Option<usize>,
    /// Gauss–Legendre points per interval.
    pub quadrature_order: usize,
}

impl AdjointConfig {
    pub fn new(variant: AdjointVariant, solver_config: SolverConfig) -> Self {
        Self {
            variant,
            solver_config,
            reverse: None,
            checkpoints: None,
            quadrature_order: 7,
        }
    }

    pub fn with_checkpoints(mut self, k: usize) -> Self {
        self.checkpoints = Some(k);
        self
    }

    pub(crate) fn checkpoint_count(&self) -> Option<usize> {
        self.checkpoints.or(self.solver_config.checkpoints)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quadrature_order < 2 {
            return Err(Error::InvalidArgument(format!(
                "quadrature order must be >= 2, got {}",
                self.quadrature_order
            )));
        }
        if self.checkpoint_count() == Some(0) {
            return Err(Error::InvalidArgument("checkpoint count must be at least 1".into()));
        }
        self.solver_config.validate()?;
        if let Some(r) = &self.reverse {
            r.validate()?;
        }
        Ok(())
    }
}

/// Costate and running gradient integral of the reverse pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub lambda: Vec<f64>,
    pub g_accum: Vec<f64>,
}

/// Dispatches on [`AdjointConfig::variant`].
pub fn adjoint_gradient(problem: &OdeProblem, loss: &LossSpec, config: &AdjointConfig) -> Result<SensitivityResult> {
    match config.variant {
        AdjointVariant::Discrete => discrete_adjoint(problem, loss, config),
        _ => continuous_adjoint(problem, loss, config),
    }
}
