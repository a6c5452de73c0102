use crate::error::{Error, Result};
use crate::problem::{DynVectorField, Node, OdeProblem, Solution, SolverStats};
use crate::scalar::Scalar;

use super::control::{inverse_error, propose_dt, scaled_error_weighted, Controller, NormMode};
use super::tableau::ButcherTableau;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Euler,
    Rk4,
    /// Adaptive Dormand–Prince 5(4).
    Dp5,
}

impl Method {
    pub fn tableau(self) -> ButcherTableau {
        match self {
            Method::Euler => ButcherTableau::euler(),
            Method::Rk4 => ButcherTableau::rk4(),
            Method::Dp5 => ButcherTableau::dormand_prince(),
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, Method::Dp5)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Euler => "Euler",
            Method::Rk4 => "RK4",
            Method::Dp5 => "DP5",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            "dp5" | "dopri5" | "dp5-adaptive" => Ok(Method::Dp5),
            _ => Err(Error::Config(format!("unknown solver method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SaveMode {
    AllSteps,
    SaveAt(Vec<f64>),
    FinalOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Step for fixed-step methods, initial guess for adaptive ones.
    pub dt: Option<f64>,
    pub abstol: f64,
    pub reltol: f64,
    /// Cap on attempted (accepted + rejected) steps.
    pub max_steps: usize,
    pub controller: Controller,
    pub norm_mode: NormMode,
    /// Weight of tangent coordinates in the joint norm.
    pub tangent_scale: f64,
    pub save: SaveMode,
    pub checkpoints: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Dp5,
            dt: None,
            abstol: 1e-8,
            reltol: 1e-8,
            max_steps: 1_000_000,
            controller: Controller::default(),
            norm_mode: NormMode::JointPrimalDual,
            tangent_scale: 1.0,
            save: SaveMode::AllSteps,
            checkpoints: None,
        }
    }
}

impl SolverConfig {
    pub fn adaptive(tol: f64) -> Self {
        Self {
            abstol: tol,
            reltol: tol,
            ..Self::default()
        }
    }

    pub fn fixed(method: Method, dt: f64) -> Self {
        Self {
            method,
            dt: Some(dt),
            ..Self::default()
        }
    }

    pub fn with_save(mut self, save: SaveMode) -> Self {
        self.save = save;
        self
    }

    pub fn with_norm(mut self, norm: NormMode) -> Self {
        self.norm_mode = norm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.abstol > 0.0) || !(self.reltol > 0.0) {
            return bad(format!(
                "tolerances must be positive (abstol {}, reltol {})",
                self.abstol, self.reltol
            ));
        }
        if !(self.tangent_scale > 0.0) || !self.tangent_scale.is_finite() {
            return bad(format!("tangent_scale must be positive, got {}", self.tangent_scale));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        let c = &self.controller;
        if !(c.eta_min < 1.0 && 1.0 < c.eta_max) {
            return bad(format!(
                "controller clamp needs eta_min < 1 < eta_max, got [{}, {}]",
                c.eta_min, c.eta_max
            ));
        }
        match self.dt {
            Some(dt) if !(dt > 0.0) || !dt.is_finite() => return bad(format!("dt must be positive, got {dt}")),
            None if !self.method.is_adaptive() => {
                return bad(format!("{} is fixed-step and needs dt", self.method.label()))
            }
            _ => {}
        }
        if self.checkpoints == Some(0) {
            return bad("checkpoint count must be at least 1".into());
        }
        Ok(())
    }
}

/// Something that can be integrated: `du/dt = F(t, u)`.
pub trait System<T> {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, u: &[T], du: &mut [T]) -> Result<()>;
}

/// An [`OdeProblem`]'s vector field with parameters bound in scalar kind `T`.
pub struct FieldSystem<'a, T> {
    pub field: &'a dyn DynVectorField,
    pub params: Vec<T>,
    pub n: usize,
}

impl<T: Scalar> System<T> for FieldSystem<'_, T> {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, t: f64, u: &[T], du: &mut [T]) -> Result<()> {
        T::call_field(self.field, t, u, &self.params, du);
        Ok(())
    }
}

/// Closure-backed system.
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<T, F> System<T> for FnSystem<F>
where
    F: Fn(f64, &[T], &mut [T]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, u: &[T], du: &mut [T]) -> Result<()> {
        (self.f)(t, u, du)
    }
}

#[derive(Debug, Clone)]
pub struct RkStep<T> {
    pub u_next: Vec<T>,
    pub u_embedded: Option<Vec<T>>,
    /// `kᵢ` for every stage.
    pub stages: Vec<Vec<T>>,
    pub evaluations: usize,
}

fn combine<T: Scalar>(u: &[T], dt: f64, weights: &[f64], k: &[Vec<T>]) -> Vec<T> {
    (0..u.len())
        .map(|c| {
            let mut acc = u[c].clone();
            for (w, kj) in weights.iter().zip(k) {
                if *w != 0.0 {
                    acc = acc + kj[c].clone() * (dt * w);
                }
            }
            acc
        })
        .collect()
}

fn all_finite<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(Scalar::is_finite)
}

/// One explicit Runge-Kutta step. `k1` may be supplied when `f(t, u)` is
/// already known.
pub fn rk_step<T: Scalar, S: System<T> + ?Sized>(
    tab: &ButcherTableau,
    sys: &S,
    t: f64,
    u: &[T],
    dt: f64,
    k1: Option<&[T]>,
) -> Result<RkStep<T>> {
    let s = tab.stages();
    let n = u.len();
    let mut stages: Vec<Vec<T>> = Vec::with_capacity(s);
    let mut evaluations = 0;
    let blowup = |hint: &str| Error::NumericalBlowup {
        t,
        dt,
        hint: hint.to_string(),
    };
    for i in 0..s {
        let k = if let (0, Some(k1)) = (i, k1) {
            k1.to_vec()
        } else {
            let y = if i == 0 {
                u.to_vec()
            } else {
                combine(u, dt, &tab.a[i][..i], &stages)
            };
            if !all_finite(&y) {
                return Err(blowup(""));
            }
            let mut k = vec![T::zero(); n];
            sys.eval(t + tab.c[i] * dt, &y, &mut k)?;
            evaluations += 1;
            k
        };
        if !all_finite(&k) {
            return Err(blowup(""));
        }
        stages.push(k);
    }
    let u_next = combine(u, dt, &tab.b, &stages);
    if !all_finite(&u_next) {
        return Err(blowup(""));
    }
    let u_embedded = tab.b_hat.as_ref().map(|bh| combine(u, dt, bh, &stages));
    Ok(RkStep {
        u_next,
        u_embedded,
        stages,
        evaluations,
    })
}

/// Resumable integrator state. Restoring it replays the same steps bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorState<T> {
    pub t: f64,
    pub u: Vec<T>,
    /// `F(t, u)`
    pub f: Vec<T>,
    /// Next proposed step (adaptive) or nominal step (fixed).
    pub dt: f64,
    /// Inverse scaled errors of the last two accepted steps.
    pub w_hist: [f64; 2],
    /// Accepted steps so far.
    pub step: usize,
}

impl<T: Clone> IntegratorState<T> {
    pub fn node(&self) -> Node<T> {
        Node {
            t: self.t,
            u: self.u.clone(),
            f: self.f.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct FixedGrid {
    dt: f64,
    steps: usize,
}

pub struct Integrator<'s, T, S: ?Sized> {
    sys: &'s S,
    tab: ButcherTableau,
    fsal: bool,
    cfg: SolverConfig,
    t0: f64,
    t1: f64,
    fixed: Option<FixedGrid>,
    state: IntegratorState<T>,
    attempts: usize,
    pub stats: SolverStats,
    pub step_errors: Vec<f64>,
}

/// Number of fixed steps of nominal size `dt` covering `[t0, t1]`, the last
/// one shortened.
pub fn fixed_step_count(t0: f64, t1: f64, dt: f64) -> usize {
    (((t1 - t0) / dt) - 1e-9).ceil().max(1.0) as usize
}

impl<'s, T: Scalar, S: System<T> + ?Sized> Integrator<'s, T, S> {
    pub fn new(sys: &'s S, cfg: &SolverConfig, t0: f64, t1: f64, u0: Vec<T>) -> Result<Self> {
        cfg.validate()?;
        if !(t1 > t0) {
            return Err(Error::InvalidArgument(format!(
                "integration interval [{t0}, {t1}] is empty"
            )));
        }
        if u0.len() != sys.dim() {
            return Err(Error::InvalidDimension {
                what: "initial state",
                expected: sys.dim(),
                got: u0.len(),
            });
        }
        let mut f = vec![T::zero(); u0.len()];
        sys.eval(t0, &u0, &mut f)?;
        let dt = cfg.dt.unwrap_or(1e-3 * (t1 - t0));
        let state = IntegratorState {
            t: t0,
            u: u0,
            f,
            dt,
            w_hist: [1.0, 1.0],
            step: 0,
        };
        let mut it = Self::resume(sys, cfg, t0, t1, state);
        it.stats.rhs_evaluations = 1;
        Ok(it)
    }

    /// Continues from a saved state without re-evaluating anything.
    pub fn resume(sys: &'s S, cfg: &SolverConfig, t0: f64, t1: f64, state: IntegratorState<T>) -> Self {
        let tab = cfg.method.tableau();
        let fixed = (!cfg.method.is_adaptive()).then(|| {
            let dt = cfg.dt.expect("validated");
            FixedGrid {
                dt,
                steps: fixed_step_count(t0, t1, dt),
            }
        });
        Self {
            sys,
            fsal: tab.is_fsal(),
            tab,
            cfg: cfg.clone(),
            t0,
            t1,
            fixed,
            state,
            attempts: 0,
            stats: SolverStats::default(),
            step_errors: Vec::new(),
        }
    }

    pub fn state(&self) -> &IntegratorState<T> {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        match self.fixed {
            Some(g) => self.state.step >= g.steps,
            None => self.state.t >= self.t1,
        }
    }

    fn grid_time(&self, m: usize) -> f64 {
        let g = self.fixed.expect("fixed grid");
        if m >= g.steps {
            self.t1
        } else {
            self.t0 + m as f64 * g.dt
        }
    }

    fn check_budget(&mut self) -> Result<()> {
        self.attempts += 1;
        if self.attempts > self.cfg.max_steps {
            return Err(Error::NonConvergence {
                max_steps: self.cfg.max_steps,
                t: self.state.t,
            });
        }
        Ok(())
    }

    /// Takes one accepted step.
    pub fn advance(&mut self) -> Result<()> {
        if self.is_done() {
            return Ok(());
        }
        if self.fixed.is_some() {
            self.check_budget()?;
            let m = self.state.step;
            let (ta, tb) = (self.grid_time(m), self.grid_time(m + 1));
            let dt = tb - ta;
            let st = rk_step(&self.tab, self.sys, ta, &self.state.u, dt, Some(&self.state.f))?;
            let mut f = vec![T::zero(); st.u_next.len()];
            self.sys.eval(tb, &st.u_next, &mut f)?;
            self.stats.rhs_evaluations += st.evaluations + 1;
            self.stats.accepted_steps += 1;
            self.state.t = tb;
            self.state.u = st.u_next;
            self.state.f = f;
            self.state.step += 1;
            return Ok(());
        }

        let t = self.state.t;
        let remaining = self.t1 - t;
        let q = self.tab.embedded_order.map_or(self.tab.order, |e| e + 1);
        let mut dt = self.state.dt.min(remaining);
        loop {
            self.check_budget()?;
            let last = dt >= remaining * (1.0 - 1e-12);
            if last {
                dt = remaining;
            }
            let st = rk_step(&self.tab, self.sys, t, &self.state.u, dt, Some(&self.state.f))?;
            self.stats.rhs_evaluations += st.evaluations;
            let u_hat = st.u_embedded.as_ref().ok_or_else(|| {
                Error::UnsupportedConfiguration(format!("{} has no embedded error estimate", self.tab.name))
            })?;
            let err = scaled_error_weighted(
                &st.u_next,
                u_hat,
                self.cfg.abstol,
                self.cfg.reltol,
                self.cfg.norm_mode,
                self.cfg.tangent_scale,
            );
            if err <= 1.0 {
                let w = inverse_error(err);
                let [w1, w2] = self.state.w_hist;
                let next_dt = propose_dt(dt, [w, w1, w2], &self.cfg.controller, q);
                let t_new = if last { self.t1 } else { t + dt };
                let f = if self.fsal {
                    st.stages.last().unwrap().clone()
                } else {
                    let mut f = vec![T::zero(); st.u_next.len()];
                    self.sys.eval(t_new, &st.u_next, &mut f)?;
                    self.stats.rhs_evaluations += 1;
                    f
                };
                self.state = IntegratorState {
                    t: t_new,
                    u: st.u_next,
                    f,
                    dt: next_dt,
                    w_hist: [w, w1],
                    step: self.state.step + 1,
                };
                self.stats.accepted_steps += 1;
                self.step_errors.push(err);
                return Ok(());
            }
            self.stats.rejected_steps += 1;
            let [w1, w2] = self.state.w_hist;
            dt = propose_dt(dt, [inverse_error(err), w1, w2], &self.cfg.controller, q);
            if dt < 1e3 * f64::EPSILON * t.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::StepsizeUnderflow { t, dt });
            }
        }
    }
}

/// Integrates `sys` over `[t0, t1]` keeping every node for dense output.
pub fn integrate<T: Scalar, S: System<T> + ?Sized>(
    sys: &S,
    cfg: &SolverConfig,
    t0: f64,
    t1: f64,
    u0: Vec<T>,
) -> Result<Solution<T>> {
    let mut it = Integrator::new(sys, cfg, t0, t1, u0)?;
    let mut nodes = vec![it.state().node()];
    while !it.is_done() {
        it.advance()?;
        nodes.push(it.state().node());
    }
    let mut sol = Solution {
        times: Vec::new(),
        states: Vec::new(),
        nodes,
        stats: it.stats,
        step_errors: std::mem::take(&mut it.step_errors),
        fixed_grid: !cfg.method.is_adaptive(),
    };
    fill_saved(&mut sol, &cfg.save)?;
    Ok(sol)
}

fn fill_saved<T: Scalar>(sol: &mut Solution<T>, save: &SaveMode) -> Result<()> {
    match save {
        SaveMode::AllSteps => {
            sol.times = sol.nodes.iter().map(|n| n.t).collect();
            sol.states = sol.nodes.iter().map(|n| n.u.clone()).collect();
        }
        SaveMode::FinalOnly => {
            let last = sol.nodes.last().unwrap();
            sol.times = vec![last.t];
            sol.states = vec![last.u.clone()];
        }
        SaveMode::SaveAt(grid) => {
            let mut states = Vec::with_capacity(grid.len());
            for &t in grid {
                states.push(sol.state_at(t)?);
            }
            sol.times = grid.clone();
            sol.states = states;
        }
    }
    Ok(())
}

/// Solves `problem` at its nominal parameters.
pub fn solve(problem: &OdeProblem, cfg: &SolverConfig) -> Result<Solution<f64>> {
    solve_scalar(problem, &problem.params, cfg)
}

/// Solves `problem` with parameters in scalar kind `T`; the initial state
/// follows `θ` through [`OdeProblem::initial_state`].
pub fn solve_scalar<T: Scalar>(problem: &OdeProblem, theta: &[T], cfg: &SolverConfig) -> Result<Solution<T>> {
    crate::error::check_dim("parameter vector", problem.p(), theta.len())?;
    let sys = FieldSystem {
        field: problem.field.as_ref(),
        params: theta.to_vec(),
        n: problem.n(),
    };
    let u0 = problem.initial_state(theta);
    integrate(&sys, cfg, problem.tspan.0, problem.tspan.1, u0)
}
