use std::fmt;
use std::str::FromStr;

use crate::adjoints::{adjoint_gradient, AdjointConfig, AdjointVariant};
use crate::direct::{direct_gradient, DirectMethod, DirectMethodConfig};
use crate::error::{Error, Result};
use crate::forward::forward_sensitivity;
use crate::problem::{LossSpec, OdeProblem, SensitivityResult};
use crate::solvers::SolverConfig;

/// Every gradient method the harness can run, under one label space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GradientMethod {
    Direct(DirectMethod),
    ForwardSensitivity,
    Adjoint(AdjointVariant),
}

impl GradientMethod {
    pub const ADJOINT_COMPARISON: [GradientMethod; 5] = [
        GradientMethod::ForwardSensitivity,
        GradientMethod::Adjoint(AdjointVariant::Discrete),
        GradientMethod::Adjoint(AdjointVariant::ContinuousBacksolve),
        GradientMethod::Adjoint(AdjointVariant::ContinuousInterpolating),
        GradientMethod::Adjoint(AdjointVariant::ContinuousQuadrature),
    ];

    /// Everything except CenteredFD, which serves as the reference.
    pub fn gradcheck_default() -> Vec<GradientMethod> {
        let mut v = vec![
            GradientMethod::Direct(DirectMethod::ForwardFD),
            GradientMethod::Direct(DirectMethod::ComplexStep),
            GradientMethod::Direct(DirectMethod::ForwardAD),
        ];
        v.extend(Self::ADJOINT_COMPARISON);
        v
    }

    pub fn label(self) -> &'static str {
        match self {
            GradientMethod::Direct(m) => m.label(),
            GradientMethod::ForwardSensitivity => "ForwardSensitivity",
            GradientMethod::Adjoint(v) => v.label(),
        }
    }

    pub fn needs_fixed_grid(self) -> bool {
        self == GradientMethod::Adjoint(AdjointVariant::Discrete)
    }

    /// Runs the method. `fixed` is used by methods that need a fixed grid,
    /// `solver` by everything else.
    pub fn run(
        self,
        problem: &OdeProblem,
        loss: &LossSpec,
        solver: &SolverConfig,
        fixed: &SolverConfig,
    ) -> Result<SensitivityResult> {
        match self {
            GradientMethod::Direct(m) => direct_gradient(problem, loss, &DirectMethodConfig::new(m, solver.clone())),
            GradientMethod::ForwardSensitivity => forward_sensitivity(problem, loss, solver),
            GradientMethod::Adjoint(v) => {
                let cfg = if self.needs_fixed_grid() { fixed } else { solver };
                adjoint_gradient(problem, loss, &AdjointConfig::new(v, cfg.clone()))
            }
        }
    }
}

impl fmt::Display for GradientMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GradientMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(m) = s.parse::<DirectMethod>() {
            return Ok(GradientMethod::Direct(m));
        }
        if s.eq_ignore_ascii_case("ForwardSensitivity") {
            return Ok(GradientMethod::ForwardSensitivity);
        }
        AdjointVariant::ALL
            .into_iter()
            .find(|v| v.label().eq_ignore_ascii_case(s))
            .map(GradientMethod::Adjoint)
            .ok_or_else(|| Error::Config(format!("unknown gradient method `{s}`")))
    }
}
