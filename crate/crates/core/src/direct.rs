//! Direct gradient methods that treat solve-then-loss as one program:
//! finite differences, the complex step, and forward-mode AD through the
//! solver.

use crate::error::{Error, Result};
use crate::problem::{pointwise_form, LossSpec, OdeProblem, SensitivityResult, SolverStats, WorkStats};
use crate::scalar::{multidual_seed, Complex64, Scalar};
use crate::solvers::{solve_scalar, NormMode, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdScheme {
    Forward,
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectMethod {
    ForwardFD,
    CenteredFD,
    ComplexStep,
    ForwardAD,
}

impl DirectMethod {
    pub const ALL: [DirectMethod; 4] = [
        DirectMethod::ForwardFD,
        DirectMethod::CenteredFD,
        DirectMethod::ComplexStep,
        DirectMethod::ForwardAD,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DirectMethod::ForwardFD => "ForwardFD",
            DirectMethod::CenteredFD => "CenteredFD",
            DirectMethod::ComplexStep => "ComplexStep",
            DirectMethod::ForwardAD => "ForwardAD",
        }
    }
}

impl std::str::FromStr for DirectMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DirectMethod::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown direct method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectMethodConfig {
    pub method: DirectMethod,
    /// Step size; `None` picks [`default_epsilon`]. Ignored by ForwardAD.
    pub epsilon: Option<f64>,
    pub solver_config: SolverConfig,
}

impl DirectMethodConfig {
    pub fn new(method: DirectMethod, solver_config: SolverConfig) -> Self {
        Self {
            method,
            epsilon: None,
            solver_config,
        }
    }
}

/// `1e-6·max(1, |θᵢ|)` for finite differences, `1e-12` for the complex step.
pub fn default_epsilon(method: DirectMethod, theta_i: f64) -> f64 {
    match method {
        DirectMethod::ComplexStep => 1e-12,
        _ => 1e-6 * theta_i.abs().max(1.0),
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step size must be positive, got {eps}")))
    }
}

fn finite(v: f64, component: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteLoss { component })
    }
}

/// Finite-difference gradient, one coordinate direction at a time.
///
/// Forward uses `p + 1` loss evaluations, Centered `2p`.
pub fn fd_gradient<F>(loss_fn: F, theta: &[f64], eps: f64, scheme: FdScheme) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    check_eps(eps)?;
    let base = match scheme {
        FdScheme::Forward => Some(loss_fn(theta).and_then(|v| finite(v, 0))?),
        FdScheme::Centered => None,
    };
    let mut th = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        th[i] = theta[i] + eps;
        let up = loss_fn(&th).and_then(|v| finite(v, i))?;
        let g = match base {
            Some(l0) => (up - l0) / eps,
            None => {
                th[i] = theta[i] - eps;
                let down = loss_fn(&th).and_then(|v| finite(v, i))?;
                (up - down) / (2.0 * eps)
            }
        };
        th[i] = theta[i];
        grad.push(g);
    }
    Ok(grad)
}

/// `(f(u + εv, θ, t) − f(u, θ, t)) / ε`.
pub fn fd_jvp(problem: &OdeProblem, u: &[f64], theta: &[f64], t: f64, v: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_eps(eps)?;
    crate::error::check_dim("direction", u.len(), v.len())?;
    let mut f0 = vec![0.0; u.len()];
    let mut f1 = vec![0.0; u.len()];
    problem.field.eval_f64(t, u, theta, &mut f0);
    let up: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + eps * b).collect();
    problem.field.eval_f64(t, &up, theta, &mut f1);
    Ok(f1.iter().zip(&f0).map(|(a, b)| (a - b) / eps).collect())
}

/// `Im L(θ + iεeᵢ) / ε` per component.
pub fn complexstep_gradient<F>(loss_fn: F, theta: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[Complex64]) -> Result<Complex64>,
{
    check_eps(eps)?;
    let mut th: Vec<Complex64> = theta.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        th[i] = Complex64::new(theta[i], eps);
        let v = loss_fn(&th)?;
        grad.push(finite(v.im / eps, i)?);
        th[i] = Complex64::new(theta[i], 0.0);
    }
    Ok(grad)
}

/// Solve-then-loss in any scalar kind. Integrated losses are evaluated
/// through an appended quadrature state so every kind sees the same program.
pub fn pipeline_loss<T: Scalar>(
    problem: &OdeProblem,
    loss: &LossSpec,
    theta: &[T],
    config: &SolverConfig,
) -> Result<(T, SolverStats)> {
    let (prob, loss) = pointwise_form(problem, loss);
    loss.validate(prob.n(), prob.tspan)?;
    let sol = solve_scalar(&prob, theta, config)?;
    let mut acc = T::zero();
    for (i, &t) in loss.observation_times().iter().enumerate() {
        let u = sol.state_at(t)?;
        acc = acc + loss.observation_term(i, &u);
    }
    Ok((acc, sol.stats))
}

/// Forward-mode AD: seeds θ with `p` tangent directions and differentiates
/// the whole pipeline, including the adaptive step controller.
pub fn forwardad_gradient(problem: &OdeProblem, loss: &LossSpec, config: &SolverConfig) -> Result<SensitivityResult> {
    let theta = multidual_seed(&problem.params)?;
    let (l, stats) = pipeline_loss(problem, loss, &theta, config)?;
    let mut warnings = Vec::new();
    let mut method = "ForwardAD".to_string();
    if config.method.is_adaptive() && config.norm_mode == NormMode::PrimalOnly {
        method.push_str("-PrimalOnly");
        warnings.push(
            "PrimalOnly error norm ignores the tangent error; the gradient may not converge with tolerance".into(),
        );
    }
    let mut ws = WorkStats::default();
    ws.absorb(&stats);
    Ok(SensitivityResult {
        gradient: (0..problem.p()).map(|i| l.tangent(i)).collect(),
        loss: l.value,
        sensitivity_trajectory: None,
        method,
        stats: ws,
        warnings,
    })
}

/// Runs one direct method on a problem, counting the work of every solve.
pub fn direct_gradient(
    problem: &OdeProblem,
    loss: &LossSpec,
    config: &DirectMethodConfig,
) -> Result<SensitivityResult> {
    let cfg = &config.solver_config;
    if config.method == DirectMethod::ForwardAD {
        return forwardad_gradient(problem, loss, cfg);
    }
    let theta = &problem.params;
    let (l0, base_stats) = pipeline_loss(problem, loss, theta, cfg)?;
    let stats = std::cell::RefCell::new(WorkStats::default());
    let eps_for = |i: usize| {
        config
            .epsilon
            .unwrap_or_else(|| default_epsilon(config.method, theta[i]))
    };
    let mut gradient = Vec::with_capacity(theta.len());
    // one call per component so each can carry its own default step
    for i in 0..theta.len() {
        let eps = eps_for(i);
        let g = match config.method {
            DirectMethod::ComplexStep => {
                // the joint norm then controls Im(u)/ε, the derivative
                let cs_cfg = SolverConfig {
                    tangent_scale: 1.0 / eps,
                    ..cfg.clone()
                };
                let f = |th: &[Complex64]| {
                    let mut full: Vec<Complex64> = theta.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                    full[i] = th[0];
                    let (v, s) = pipeline_loss(problem, loss, &full, &cs_cfg)?;
                    stats.borrow_mut().absorb(&s);
                    Ok(v)
                };
                complexstep_gradient(f, &theta[i..=i], eps)
            }
            _ => {
                let scheme = if config.method == DirectMethod::ForwardFD {
                    FdScheme::Forward
                } else {
                    FdScheme::Centered
                };
                let f = |th: &[f64]| {
                    if scheme == FdScheme::Forward && th[0] == theta[i] {
                        return Ok(l0);
                    }
                    let mut full = theta.clone();
                    full[i] = th[0];
                    let (v, s) = pipeline_loss(problem, loss, &full, cfg)?;
                    stats.borrow_mut().absorb(&s);
                    Ok(v)
                };
                fd_gradient(f, &theta[i..=i], eps, scheme)
            }
        };
        let g = g.map_err(|e| match e {
            Error::NonFiniteLoss { .. } => Error::NonFiniteLoss { component: i },
            e => e,
        })?;
        gradient.push(g[0]);
    }
    let mut ws = stats.into_inner();
    ws.absorb(&base_stats);
    Ok(SensitivityResult {
        gradient,
        loss: l0,
        sensitivity_trajectory: None,
        method: config.method.label().into(),
        stats: ws,
        warnings: Vec::new(),
    })
}
