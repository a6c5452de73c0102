//! Problem, loss and solution data model shared by every solver and
//! sensitivity method.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{Complex64, Dual, MultiDual, Scalar};

/// Right-hand side `f(u, θ, t)`, written once for every scalar kind.
pub trait VectorField: Send + Sync {
    fn eval<T: Scalar>(&self, t: f64, u: &[T], p: &[T], du: &mut [T]);
}

/// Object-safe form of [`VectorField`]. Implemented for every
/// `VectorField`; solvers dispatch through [`Scalar::call_field`].
pub trait DynVectorField: Send + Sync {
    fn eval_f64(&self, t: f64, u: &[f64], p: &[f64], du: &mut [f64]);
    fn eval_complex(&self, t: f64, u: &[Complex64], p: &[Complex64], du: &mut [Complex64]);
    fn eval_dual(&self, t: f64, u: &[Dual], p: &[Dual], du: &mut [Dual]);
    fn eval_multidual(&self, t: f64, u: &[MultiDual], p: &[MultiDual], du: &mut [MultiDual]);
}

impl<V: VectorField> DynVectorField for V {
    fn eval_f64(&self, t: f64, u: &[f64], p: &[f64], du: &mut [f64]) {
        self.eval(t, u, p, du)
    }
    fn eval_complex(&self, t: f64, u: &[Complex64], p: &[Complex64], du: &mut [Complex64]) {
        self.eval(t, u, p, du)
    }
    fn eval_dual(&self, t: f64, u: &[Dual], p: &[Dual], du: &mut [Dual]) {
        self.eval(t, u, p, du)
    }
    fn eval_multidual(&self, t: f64, u: &[MultiDual], p: &[MultiDual], du: &mut [MultiDual]) {
        self.eval(t, u, p, du)
    }
}

/// Running-cost integrand `h(u, θ)` of an integrated loss.
pub trait Integrand: Send + Sync {
    fn eval<T: Scalar>(&self, t: f64, u: &[T], p: &[T]) -> T;
}

pub trait DynIntegrand: Send + Sync {
    fn eval_f64(&self, t: f64, u: &[f64], p: &[f64]) -> f64;
    fn eval_complex(&self, t: f64, u: &[Complex64], p: &[Complex64]) -> Complex64;
    fn eval_dual(&self, t: f64, u: &[Dual], p: &[Dual]) -> Dual;
    fn eval_multidual(&self, t: f64, u: &[MultiDual], p: &[MultiDual]) -> MultiDual;
}

impl<H: Integrand> DynIntegrand for H {
    fn eval_f64(&self, t: f64, u: &[f64], p: &[f64]) -> f64 {
        self.eval(t, u, p)
    }
    fn eval_complex(&self, t: f64, u: &[Complex64], p: &[Complex64]) -> Complex64 {
        self.eval(t, u, p)
    }
    fn eval_dual(&self, t: f64, u: &[Dual], p: &[Dual]) -> Dual {
        self.eval(t, u, p)
    }
    fn eval_multidual(&self, t: f64, u: &[MultiDual], p: &[MultiDual]) -> MultiDual {
        self.eval(t, u, p)
    }
}

/// Analytic Jacobian callback `(t, u, θ) -> matrix`.
pub type JacobianFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> Matrix + Send + Sync>;

/// An initial value problem `du/dt = f(u, θ, t)`, `u(t0) = u0(θ)`.
///
/// `params` is the nominal parameter vector. The initial state depends on
/// θ through the affine map `u0(θ') = u0 + (∂u0/∂θ)(θ' − θ)`, so every
/// gradient method sees the same `s(t0) = ∂u0/∂θ`.
#[derive(Clone)]
pub struct OdeProblem {
    pub name: String,
    pub field: Arc<dyn DynVectorField>,
    pub u0: Vec<f64>,
    pub u0_param_jacobian: Option<Matrix>,
    pub params: Vec<f64>,
    pub tspan: (f64, f64),
    pub jac_u: Option<JacobianFn>,
    pub jac_p: Option<JacobianFn>,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("n", &self.n())
            .field("p", &self.p())
            .field("tspan", &self.tspan)
            .field("u0", &self.u0)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl OdeProblem {
    pub fn new(
        field: impl DynVectorField + 'static,
        u0: Vec<f64>,
        params: Vec<f64>,
        tspan: (f64, f64),
    ) -> Result<Self> {
        Self::from_arc(Arc::new(field), u0, params, tspan)
    }

    pub fn from_arc(field: Arc<dyn DynVectorField>, u0: Vec<f64>, params: Vec<f64>, tspan: (f64, f64)) -> Result<Self> {
        if !(tspan.1 > tspan.0) || !tspan.0.is_finite() || !tspan.1.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time span must satisfy t0 < t1, got {tspan:?}"
            )));
        }
        if u0.is_empty() {
            return Err(Error::InvalidDimension {
                what: "initial state",
                expected: 1,
                got: 0,
            });
        }
        Ok(Self {
            name: "custom".into(),
            field,
            u0,
            u0_param_jacobian: None,
            params,
            tspan,
            jac_u: None,
            jac_p: None,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_jacobians(mut self, jac_u: JacobianFn, jac_p: JacobianFn) -> Self {
        self.jac_u = Some(jac_u);
        self.jac_p = Some(jac_p);
        self
    }

    pub fn with_u0_param_jacobian(mut self, jac: Matrix) -> Result<Self> {
        check_dim("u0 jacobian rows", self.n(), jac.rows())?;
        check_dim("u0 jacobian cols", self.p(), jac.cols())?;
        self.u0_param_jacobian = Some(jac);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.u0.len()
    }

    pub fn p(&self) -> usize {
        self.params.len()
    }

    /// `s(t0) = ∂u0/∂θ`, zero unless the problem says otherwise.
    pub fn initial_sensitivity(&self) -> Matrix {
        self.u0_param_jacobian
            .clone()
            .unwrap_or_else(|| Matrix::zeros(self.n(), self.p()))
    }

    /// `u0(θ)` evaluated in the scalar kind of `theta`, so tangents and
    /// complex perturbations of θ reach the initial state.
    pub fn initial_state<T: Scalar>(&self, theta: &[T]) -> Vec<T> {
        match &self.u0_param_jacobian {
            None => self.u0.iter().map(|&x| T::from_f64(x)).collect(),
            Some(jac) => (0..self.n())
                .map(|i| {
                    let mut v = T::from_f64(self.u0[i]);
                    for (j, th) in theta.iter().enumerate() {
                        let a = jac[(i, j)];
                        if a != 0.0 {
                            v = v + (th.clone() - self.params[j]) * a;
                        }
                    }
                    v
                })
                .collect(),
        }
    }

    /// Same problem with nominal parameters `theta`.
    pub fn reparametrized(&self, theta: &[f64]) -> Result<OdeProblem> {
        check_dim("parameter vector", self.p(), theta.len())?;
        let mut out = self.clone();
        out.u0 = self.initial_state(theta);
        out.params = theta.to_vec();
        Ok(out)
    }

    pub fn eval_rhs(&self, t: f64, u: &[f64]) -> Vec<f64> {
        let mut du = vec![0.0; self.n()];
        self.field.eval_f64(t, u, &self.params, &mut du);
        du
    }
}

/// Loss functionals on the solution. Observation operators are the identity.
#[derive(Clone)]
pub enum LossSpec {
    /// `½ Σᵢ wᵢ ‖u(tᵢ) − uᵢᵒᵇˢ‖²`
    PointwiseSquaredError {
        times: Vec<f64>,
        targets: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// `Σᵢ cᵢᵀ u(tᵢ)`, e.g. a single component at the final time or the
    /// sum of all saved components.
    PointwiseLinear {
        times: Vec<f64>,
        coefficients: Vec<Vec<f64>>,
    },
    /// `∫ h(u, θ) dt` over the whole time span.
    Integrated { integrand: Arc<dyn DynIntegrand> },
}

impl fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::PointwiseSquaredError { times, weights, .. } => f
                .debug_struct("PointwiseSquaredError")
                .field("times", times)
                .field("weights", weights)
                .finish_non_exhaustive(),
            LossSpec::PointwiseLinear { times, .. } => f
                .debug_struct("PointwiseLinear")
                .field("times", times)
                .finish_non_exhaustive(),
            LossSpec::Integrated { .. } => f.write_str("Integrated"),
        }
    }
}

impl LossSpec {
    pub fn squared_error(times: Vec<f64>, targets: Vec<Vec<f64>>, weights: Vec<f64>) -> Self {
        LossSpec::PointwiseSquaredError {
            times,
            targets,
            weights,
        }
    }

    /// `L = u_component(t)`.
    pub fn component_at(t: f64, component: usize, n: usize) -> Self {
        let mut c = vec![0.0; n];
        c[component] = 1.0;
        LossSpec::PointwiseLinear {
            times: vec![t],
            coefficients: vec![c],
        }
    }

    /// `L = Σᵢ Σₖ uₖ(tᵢ)`.
    pub fn sum_at(times: Vec<f64>, n: usize) -> Self {
        let coefficients = vec![vec![1.0; n]; times.len()];
        LossSpec::PointwiseLinear { times, coefficients }
    }

    pub fn integrated(h: impl DynIntegrand + 'static) -> Self {
        LossSpec::Integrated { integrand: Arc::new(h) }
    }

    pub fn is_pointwise(&self) -> bool {
        !matches!(self, LossSpec::Integrated { .. })
    }

    pub fn observation_times(&self) -> &[f64] {
        match self {
            LossSpec::PointwiseSquaredError { times, .. } | LossSpec::PointwiseLinear { times, .. } => times,
            LossSpec::Integrated { .. } => &[],
        }
    }

    /// Checks shapes, weights, and that observation times are strictly
    /// increasing inside `[t0, t1]`.
    pub fn validate(&self, n: usize, tspan: (f64, f64)) -> Result<()> {
        match self {
            LossSpec::PointwiseSquaredError {
                times,
                targets,
                weights,
            } => {
                check_dim("loss targets", times.len(), targets.len())?;
                check_dim("loss weights", times.len(), weights.len())?;
                for t in targets {
                    check_dim("loss target", n, t.len())?;
                }
                if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
                    return Err(Error::InvalidArgument(format!("negative loss weight {w}")));
                }
            }
            LossSpec::PointwiseLinear { times, coefficients } => {
                check_dim("loss coefficients", times.len(), coefficients.len())?;
                for c in coefficients {
                    check_dim("loss coefficient", n, c.len())?;
                }
            }
            LossSpec::Integrated { .. } => return Ok(()),
        }
        let times = self.observation_times();
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "observation times must be strictly increasing".into(),
            ));
        }
        if let Some(&t) = times.iter().find(|&&t| t < tspan.0 || t > tspan.1) {
            return Err(Error::OutOfRange {
                t,
                lo: tspan.0,
                hi: tspan.1,
            });
        }
        Ok(())
    }

    /// Term `i` of a pointwise loss, evaluated in the scalar kind of `u`.
    pub fn observation_term<T: Scalar>(&self, i: usize, u: &[T]) -> T {
        match self {
            LossSpec::PointwiseSquaredError { targets, weights, .. } => {
                let mut acc = T::zero();
                for (x, y) in u.iter().zip(&targets[i]) {
                    let d = x.clone() - *y;
                    acc = acc + d.clone() * d;
                }
                acc * (0.5 * weights[i])
            }
            LossSpec::PointwiseLinear { coefficients, .. } => {
                let mut acc = T::zero();
                for (x, c) in u.iter().zip(&coefficients[i]) {
                    if *c != 0.0 {
                        acc = acc + x.clone() * *c;
                    }
                }
                acc
            }
            LossSpec::Integrated { .. } => T::zero(),
        }
    }

    /// Gradient of term `i` with respect to `u(tᵢ)`.
    pub fn observation_grad(&self, i: usize, u: &[f64]) -> Vec<f64> {
        match self {
            LossSpec::PointwiseSquaredError { targets, weights, .. } => {
                u.iter().zip(&targets[i]).map(|(x, y)| weights[i] * (x - y)).collect()
            }
            LossSpec::PointwiseLinear { coefficients, .. } => coefficients[i].clone(),
            LossSpec::Integrated { .. } => vec![0.0; u.len()],
        }
    }
}

/// `(h, ∂h/∂u, ∂h/∂θ)` of an integrand at one point, via dual seeding.
pub fn integrand_partials(h: &dyn DynIntegrand, t: f64, u: &[f64], theta: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let (n, p) = (u.len(), theta.len());
    let k = n + p;
    let ud: Vec<MultiDual> = u
        .iter()
        .enumerate()
        .map(|(i, &x)| MultiDual::variable(x, i, k))
        .collect();
    let pd: Vec<MultiDual> = theta
        .iter()
        .enumerate()
        .map(|(j, &x)| MultiDual::variable(x, n + j, k))
        .collect();
    let r = h.eval_multidual(t, &ud, &pd);
    let g: Vec<f64> = (0..k).map(|i| r.tangent(i)).collect();
    (r.value, g[..n].to_vec(), g[n..].to_vec())
}

/// One stored integrator node: time, state, and `f` at that state.
#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub t: f64,
    pub u: Vec<T>,
    pub f: Vec<T>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
}

impl std::ops::AddAssign for SolverStats {
    fn add_assign(&mut self, o: Self) {
        self.accepted_steps += o.accepted_steps;
        self.rejected_steps += o.rejected_steps;
        self.rhs_evaluations += o.rhs_evaluations;
    }
}

/// Numerical solution of an [`OdeProblem`].
///
/// `times`/`states` follow the requested save mode. `nodes` always holds
/// every accepted step endpoint with its derivative, which is what dense
/// output interpolates.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub times: Vec<f64>,
    pub states: Vec<Vec<T>>,
    pub nodes: Vec<Node<T>>,
    pub stats: SolverStats,
    /// Scaled error of every accepted adaptive step; empty for fixed steps.
    pub step_errors: Vec<f64>,
    pub fixed_grid: bool,
}

impl<T: Scalar> Solution<T> {
    pub fn final_state(&self) -> &[T] {
        &self.nodes.last().expect("solution has nodes").u
    }

    pub fn span(&self) -> (f64, f64) {
        (self.nodes[0].t, self.nodes.last().unwrap().t)
    }

    /// Index of the node within `tol` of `t`.
    pub fn node_index_near(&self, t: f64, tol: f64) -> Option<usize> {
        let i = self.nodes.partition_point(|n| n.t < t);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&k| k < self.nodes.len())
            .find(|&k| (self.nodes[k].t - t).abs() <= tol)
    }

    /// State at `t`: the matching node on fixed grids, dense output otherwise.
    pub fn state_at(&self, t: f64) -> Result<Vec<T>> {
        if self.fixed_grid {
            let tol = node_tolerance(self.span());
            match self.node_index_near(t, tol) {
                Some(k) => Ok(self.nodes[k].u.clone()),
                None => Err(Error::UnsupportedConfiguration(format!(
                    "time {t} is not a node of the fixed-step grid"
                ))),
            }
        } else {
            crate::solvers::dense_eval(self, t)
        }
    }
}

pub(crate) fn node_tolerance(span: (f64, f64)) -> f64 {
    1e-9 * (span.1 - span.0).abs().max(1.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkStats {
    pub rhs_evaluations: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest number of full states held in memory at once.
    pub peak_stored_states: usize,
    /// Forward steps recomputed from checkpoints.
    pub recomputed_steps: usize,
}

impl WorkStats {
    pub fn absorb(&mut self, s: &SolverStats) {
        self.rhs_evaluations += s.rhs_evaluations;
        self.accepted_steps += s.accepted_steps;
        self.rejected_steps += s.rejected_steps;
    }
}

/// Gradient `dL/dθ` plus whatever the method produced along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub gradient: Vec<f64>,
    pub loss: f64,
    /// `(t, s(t))` with `s = ∂u/∂θ`, at the solver's save times.
    pub sensitivity_trajectory: Option<Vec<(f64, Matrix)>>,
    pub method: String,
    pub stats: WorkStats,
    pub warnings: Vec<String>,
}

/// Loss value of a solution.
///
/// Pointwise losses read the state at each observation time; integrated
/// losses use the composite trapezoid rule over the solver nodes.
pub fn loss_eval(sol: &Solution<f64>, loss: &LossSpec, theta: &[f64]) -> Result<f64> {
    let (t0, t1) = sol.span();
    match loss {
        LossSpec::Integrated { integrand } => {
            let vals: Vec<f64> = sol.nodes.iter().map(|n| integrand.eval_f64(n.t, &n.u, theta)).collect();
            Ok(sol
                .nodes
                .windows(2)
                .zip(vals.windows(2))
                .map(|(n, v)| 0.5 * (n[1].t - n[0].t) * (v[0] + v[1]))
                .sum())
        }
        _ => {
            let mut total = 0.0;
            for (i, &t) in loss.observation_times().iter().enumerate() {
                if t < t0 || t > t1 {
                    return Err(Error::OutOfRange { t, lo: t0, hi: t1 });
                }
                let u = sol.state_at(t)?;
                total += loss.observation_term(i, &u);
            }
            Ok(total)
        }
    }
}

/// `∂L/∂u` at time `t`: the observation term's gradient for pointwise
/// losses (where `t` must be an observation time), `∂h/∂u` otherwise.
pub fn loss_grad_u(sol: &Solution<f64>, loss: &LossSpec, theta: &[f64], t: f64) -> Result<Vec<f64>> {
    let (t0, t1) = sol.span();
    if t < t0 || t > t1 {
        return Err(Error::OutOfRange { t, lo: t0, hi: t1 });
    }
    match loss {
        LossSpec::Integrated { integrand } => {
            let u = sol.state_at(t)?;
            Ok(integrand_partials(integrand.as_ref(), t, &u, theta).1)
        }
        _ => {
            let tol = node_tolerance((t0, t1));
            let i = loss
                .observation_times()
                .iter()
                .position(|&x| (x - t).abs() <= tol)
                .ok_or(Error::OutOfRange { t, lo: t0, hi: t1 })?;
            let u = sol.state_at(loss.observation_times()[i])?;
            Ok(loss.observation_grad(i, &u))
        }
    }
}

/// `(∂L/∂u)(∂u/∂θ) + ∂L/∂θ`.
pub fn chain_gradient(vjp_term: &[f64], direct_term: &[f64]) -> Result<Vec<f64>> {
    check_dim("gradient terms", vjp_term.len(), direct_term.len())?;
    Ok(vjp_term.iter().zip(direct_term).map(|(a, b)| a + b).collect())
}

/// Wraps a problem so the integrated loss becomes an extra state
/// `q' = h(u, θ)`, `q(t0) = 0`; `L = q(t1)`.
pub(crate) fn with_quadrature_state(problem: &OdeProblem, h: Arc<dyn DynIntegrand>) -> OdeProblem {
    struct QuadratureAugmented {
        inner: Arc<dyn DynVectorField>,
        h: Arc<dyn DynIntegrand>,
        n: usize,
    }
    impl VectorField for QuadratureAugmented {
        fn eval<T: Scalar>(&self, t: f64, u: &[T], p: &[T], du: &mut [T]) {
            T::call_field(self.inner.as_ref(), t, &u[..self.n], p, &mut du[..self.n]);
            du[self.n] = T::call_integrand(self.h.as_ref(), t, &u[..self.n], p);
        }
    }
    let n = problem.n();
    let mut u0 = problem.u0.clone();
    u0.push(0.0);
    let u0_param_jacobian = problem.u0_param_jacobian.as_ref().map(|j| {
        let mut rows = j.to_rows();
        rows.push(vec![0.0; problem.p()]);
        Matrix::from_rows(&rows)
    });
    OdeProblem {
        name: format!("{}+quadrature", problem.name),
        field: Arc::new(QuadratureAugmented {
            inner: problem.field.clone(),
            h,
            n,
        }),
        u0,
        u0_param_jacobian,
        params: problem.params.clone(),
        tspan: problem.tspan,
        jac_u: None,
        jac_p: None,
    }
}

/// Rewrites an integrated loss as a pointwise one on an augmented problem;
/// pointwise losses pass through unchanged.
pub(crate) fn pointwise_form(problem: &OdeProblem, loss: &LossSpec) -> (OdeProblem, LossSpec) {
    match loss {
        LossSpec::Integrated { integrand } => {
            let aug = with_quadrature_state(problem, integrand.clone());
            let n = aug.n();
            let l = LossSpec::component_at(problem.tspan.1, n - 1, n);
            (aug, l)
        }
        _ => (problem.clone(), loss.clone()),
    }
}
