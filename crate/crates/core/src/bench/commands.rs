use crate::direct::{complexstep_gradient, direct_gradient, fd_gradient, DirectMethod, DirectMethodConfig, FdScheme};
use crate::error::{Error, Result};
use crate::linalg::rel_err;
use crate::problem::{LossSpec, OdeProblem, SensitivityResult};
use crate::problems::{ProblemCatalogEntry, ProblemId};
use crate::scalar::{Complex64, Dual};
use crate::solvers::{solve, SaveMode, SolverConfig};

use super::config::{Command, RunConfig};
use super::csv::{real, reals, Table};
use super::methods::GradientMethod;

/// Relative tolerance of `gradcheck`.
pub const GRADCHECK_RTOL: f64 = 1e-3;

/// Consecutive loss increases after which a fit is declared divergent.
pub const DIVERGENCE_STREAK: usize = 10;

/// What a command prints besides its CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub report: Vec<String>,
    pub warnings: Vec<String>,
    /// Set by `gradcheck` when any row fails.
    pub failed: bool,
}

/// Runs the configured command, writing its CSV to `run.out` or stdout.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.run.command {
        Some(Command::SweepDirect) => cmd_sweep_direct(cfg),
        Some(Command::CompareAdjoints) => cmd_compare_adjoints(cfg),
        Some(Command::Gradcheck) => cmd_gradcheck(cfg),
        Some(Command::Fit) => cmd_fit(cfg),
        None => Err(Error::Config("no command given".into())),
    }
}

fn required_problem(cfg: &RunConfig, what: &str) -> Result<ProblemCatalogEntry> {
    let id = cfg
        .problem_id()?
        .ok_or_else(|| Error::Config(format!("{what} needs a problem id")))?;
    cfg.entry(id)
}

fn cfl_warning(entry: &ProblemCatalogEntry, cfg: &SolverConfig) -> Option<String> {
    match (entry.stable_dt, cfg.dt) {
        (Some(stable), Some(dt)) if !cfg.method.is_adaptive() && dt > stable => Some(format!(
            "{}: dt = {dt:e} exceeds the explicit stability limit {stable:e}; expect blowup",
            entry.id.as_str()
        )),
        _ => None,
    }
}

// sweep-direct

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub method: String,
    /// 0 for ForwardAD.
    pub epsilon: f64,
    pub gradient: Vec<f64>,
    pub abs_rel_error: f64,
    pub rhs_evaluations: usize,
}

pub const SWEEP_HEADER: [&str; 5] = ["method", "epsilon", "gradient", "abs_rel_error", "rhs_evaluations"];

fn sweep_methods(cfg: &RunConfig) -> Result<Vec<DirectMethod>> {
    let chosen = cfg.methods()?;
    if chosen.is_empty() {
        return Ok(vec![
            DirectMethod::ForwardFD,
            DirectMethod::CenteredFD,
            DirectMethod::ComplexStep,
            DirectMethod::ForwardAD,
        ]);
    }
    chosen
        .into_iter()
        .map(|m| match m {
            GradientMethod::Direct(d) => Ok(d),
            other => Err(Error::Config(format!(
                "sweep-direct only runs direct methods, not {other}"
            ))),
        })
        .collect()
}

/// Rows in (mode, method, ε) order: the closed-form map first when the
/// problem has one, then one block per solver tolerance.
pub fn sweep_direct_records(cfg: &RunConfig) -> Result<Vec<SweepRecord>> {
    let entry = required_problem(cfg, "sweep-direct")?;
    let reference = entry
        .reference_gradient
        .clone()
        .ok_or_else(|| Error::UnsupportedProblem(format!("{} at θ = {}", entry.id.as_str(), entry.theta())))?;
    let methods = sweep_methods(cfg)?;
    let grid = cfg.eps_grid()?;
    let theta = entry.theta();
    let mut rows = Vec::new();
    let mut push = |method: String, epsilon: f64, gradient: Vec<f64>, rhs_evaluations: usize| {
        rows.push(SweepRecord {
            method,
            epsilon,
            abs_rel_error: rel_err(&gradient, &reference),
            gradient,
            rhs_evaluations,
        })
    };

    if entry.analytic_loss(theta).is_some() {
        let f = |th: &[f64]| Ok(entry.analytic_loss(th[0]).expect("closed form"));
        for &m in &methods {
            let label = format!("{}:analytic", m.label());
            match m {
                DirectMethod::ForwardAD => {
                    let l = entry.analytic_loss(Dual::variable(theta)).expect("closed form");
                    push(label, 0.0, vec![l.tangent], 0);
                }
                DirectMethod::ComplexStep => {
                    let fc = |th: &[Complex64]| Ok(entry.analytic_loss(th[0]).expect("closed form"));
                    for &eps in &grid {
                        push(label.clone(), eps, complexstep_gradient(fc, &[theta], eps)?, 0);
                    }
                }
                _ => {
                    let scheme = if m == DirectMethod::ForwardFD {
                        FdScheme::Forward
                    } else {
                        FdScheme::Centered
                    };
                    for &eps in &grid {
                        push(label.clone(), eps, fd_gradient(f, &[theta], eps, scheme)?, 0);
                    }
                }
            }
        }
    }

    let base = cfg.solver_config(&entry)?;
    for &tol in &cfg.sweep.tolerances {
        let solver = SolverConfig {
            abstol: tol,
            reltol: tol,
            ..base.clone()
        };
        for &m in &methods {
            let label = format!("{}:solver:reltol={tol:e}", m.label());
            let eps_list: Vec<Option<f64>> = if m == DirectMethod::ForwardAD {
                vec![None]
            } else {
                grid.iter().map(|&e| Some(e)).collect()
            };
            for eps in eps_list {
                let dc = DirectMethodConfig {
                    epsilon: eps,
                    ..DirectMethodConfig::new(m, solver.clone())
                };
                let r = direct_gradient(&entry.problem, &entry.loss, &dc)?;
                push(label.clone(), eps.unwrap_or(0.0), r.gradient, r.stats.rhs_evaluations);
            }
        }
    }
    Ok(rows)
}

pub fn sweep_table(rows: &[SweepRecord]) -> Table {
    let mut t = Table::new(&SWEEP_HEADER);
    for r in rows {
        t.push(vec![
            r.method.clone(),
            real(r.epsilon),
            reals(&r.gradient),
            real(r.abs_rel_error),
            r.rhs_evaluations.to_string(),
        ]);
    }
    t
}

pub fn cmd_sweep_direct(cfg: &RunConfig) -> Result<Outcome> {
    let rows = sweep_direct_records(cfg)?;
    sweep_table(&rows).emit(cfg.run.out.as_deref())?;
    Ok(Outcome {
        report: vec![format!("sweep-direct: {} rows", rows.len())],
        ..Outcome::default()
    })
}

// compare-adjoints

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Skipped(String),
    Failed(String),
}

impl std::fmt::Display for RowStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowStatus::Ok => f.write_str("ok"),
            RowStatus::Skipped(why) => write!(f, "skipped: {why}"),
            RowStatus::Failed(why) => write!(f, "failed: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRecord {
    pub method: String,
    pub gradient: Option<Vec<f64>>,
    pub abs_rel_error: Option<f64>,
    pub rhs_evaluations: usize,
    pub peak_stored_states: usize,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub reference: Vec<f64>,
    /// `analytic` or `CenteredFD`.
    pub reference_kind: &'static str,
    pub records: Vec<CompareRecord>,
    pub warnings: Vec<String>,
}

pub const COMPARE_HEADER: [&str; 6] = [
    "method",
    "gradient",
    "abs_rel_error",
    "rhs_evaluations",
    "peak_stored_states",
    "status",
];

fn skip_reason(method: GradientMethod, entry: &ProblemCatalogEntry) -> Option<String> {
    let backsolve = GradientMethod::Adjoint(crate::adjoints::AdjointVariant::ContinuousBacksolve);
    (method == backsolve && !entry.reverse_stable)
        .then(|| format!("{} is not stable under time reversal", entry.id.as_str()))
}

/// The analytic gradient when the problem has one, CenteredFD otherwise.
pub fn reference_gradient(entry: &ProblemCatalogEntry, solver: &SolverConfig) -> Result<(Vec<f64>, &'static str)> {
    match &entry.reference_gradient {
        Some(g) => Ok((g.clone(), "analytic")),
        None => Ok((centered_fd(&entry.problem, &entry.loss, solver)?.gradient, "CenteredFD")),
    }
}

fn centered_fd(problem: &OdeProblem, loss: &LossSpec, solver: &SolverConfig) -> Result<SensitivityResult> {
    direct_gradient(
        problem,
        loss,
        &DirectMethodConfig::new(DirectMethod::CenteredFD, solver.clone()),
    )
}

pub fn compare_adjoints_records(cfg: &RunConfig) -> Result<Comparison> {
    let entry = required_problem(cfg, "compare-adjoints")?;
    let solver = cfg.solver_config(&entry)?;
    let fixed = cfg.fixed_solver_config(&entry)?;
    let mut warnings: Vec<String> = cfl_warning(&entry, &fixed).into_iter().collect();
    let (reference, reference_kind) = reference_gradient(&entry, &solver)?;
    let methods = match cfg.methods()? {
        m if m.is_empty() => GradientMethod::ADJOINT_COMPARISON.to_vec(),
        m => m,
    };
    let mut records = Vec::new();
    for m in methods {
        if let Some(why) = skip_reason(m, &entry) {
            records.push(CompareRecord {
                method: m.label().into(),
                gradient: None,
                abs_rel_error: None,
                rhs_evaluations: 0,
                peak_stored_states: 0,
                status: RowStatus::Skipped(why),
            });
            continue;
        }
        match m.run(&entry.problem, &entry.loss, &solver, &fixed) {
            Ok(r) => {
                warnings.extend(r.warnings.iter().map(|w| format!("{}: {w}", r.method)));
                records.push(CompareRecord {
                    abs_rel_error: Some(rel_err(&r.gradient, &reference)),
                    method: r.method,
                    gradient: Some(r.gradient),
                    rhs_evaluations: r.stats.rhs_evaluations,
                    peak_stored_states: r.stats.peak_stored_states,
                    status: RowStatus::Ok,
                })
            }
            Err(e) if e.is_numerical() => records.push(CompareRecord {
                method: m.label().into(),
                gradient: None,
                abs_rel_error: None,
                rhs_evaluations: 0,
                peak_stored_states: 0,
                status: RowStatus::Failed(e.to_string()),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(Comparison {
        reference,
        reference_kind,
        records,
        warnings,
    })
}

pub fn compare_table(c: &Comparison) -> Table {
    let mut t = Table::new(&COMPARE_HEADER);
    for r in &c.records {
        t.push(vec![
            r.method.clone(),
            r.gradient.as_deref().map(reals).unwrap_or_default(),
            r.abs_rel_error.map(real).unwrap_or_default(),
            r.rhs_evaluations.to_string(),
            r.peak_stored_states.to_string(),
            r.status.to_string(),
        ]);
    }
    t
}

pub fn cmd_compare_adjoints(cfg: &RunConfig) -> Result<Outcome> {
    let c = compare_adjoints_records(cfg)?;
    compare_table(&c).emit(cfg.run.out.as_deref())?;
    Ok(Outcome {
        report: vec![format!("reference ({}): {}", c.reference_kind, reals(&c.reference))],
        warnings: c.warnings,
        failed: false,
    })
}

// gradcheck

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skip => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRow {
    pub problem: String,
    pub method: String,
    pub gradient: Vec<f64>,
    pub reference: Vec<f64>,
    pub rel_error: f64,
    pub status: CheckStatus,
    pub note: String,
}

pub const GRADCHECK_HEADER: [&str; 7] = [
    "problem",
    "method",
    "gradient",
    "reference",
    "rel_error",
    "status",
    "note",
];

/// Checks `methods` against CenteredFD at its default step. A problem
/// with no parameters passes vacuously with no rows.
pub fn gradcheck_problem(
    name: &str,
    problem: &OdeProblem,
    loss: &LossSpec,
    solver: &SolverConfig,
    fixed: &SolverConfig,
    methods: &[GradientMethod],
    skip: impl Fn(GradientMethod) -> Option<String>,
) -> Result<Vec<GradcheckRow>> {
    if problem.p() == 0 {
        return Ok(Vec::new());
    }
    let reference = centered_fd(problem, loss, solver)?.gradient;
    let mut rows = Vec::new();
    for &m in methods {
        let mut row = GradcheckRow {
            problem: name.into(),
            method: m.label().into(),
            gradient: Vec::new(),
            reference: reference.clone(),
            rel_error: f64::NAN,
            status: CheckStatus::Skip,
            note: String::new(),
        };
        if let Some(why) = skip(m) {
            row.note = why;
            rows.push(row);
            continue;
        }
        match m.run(problem, loss, solver, fixed) {
            Ok(r) => {
                row.rel_error = rel_err(&r.gradient, &reference);
                row.status = if row.rel_error <= GRADCHECK_RTOL {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail
                };
                row.method = r.method;
                row.gradient = r.gradient;
                row.note = r.warnings.join("; ");
            }
            Err(e) => {
                row.status = CheckStatus::Fail;
                row.note = e.to_string();
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn gradcheck_rows(cfg: &RunConfig) -> Result<Vec<GradcheckRow>> {
    let ids = match cfg.problem_id()? {
        Some(id) => vec![id],
        None => ProblemId::ALL.to_vec(),
    };
    let methods = match cfg.methods()? {
        m if m.is_empty() => GradientMethod::gradcheck_default(),
        m => m,
    };
    let mut rows = Vec::new();
    for id in ids {
        let entry = cfg.entry(id)?;
        let solver = cfg.solver_config(&entry)?;
        let fixed = cfg.fixed_solver_config(&entry)?;
        rows.extend(gradcheck_problem(
            id.as_str(),
            &entry.problem,
            &entry.loss,
            &solver,
            &fixed,
            &methods,
            |m| skip_reason(m, &entry),
        )?);
    }
    Ok(rows)
}

pub fn gradcheck_report(rows: &[GradcheckRow]) -> Vec<String> {
    rows.iter()
        .map(|r| {
            let mut line = format!(
                "{} {:<10} {:<24} rel_error={:.3e}",
                r.status.as_str(),
                r.problem,
                r.method,
                r.rel_error
            );
            if !r.note.is_empty() {
                line.push_str(&format!("  ({})", r.note));
            }
            line
        })
        .collect()
}

pub fn gradcheck_table(rows: &[GradcheckRow]) -> Table {
    let mut t = Table::new(&GRADCHECK_HEADER);
    for r in rows {
        t.push(vec![
            r.problem.clone(),
            r.method.clone(),
            reals(&r.gradient),
            reals(&r.reference),
            real(r.rel_error),
            r.status.as_str().into(),
            r.note.clone(),
        ]);
    }
    t
}

/// Prints one line per check; the CSV is written only with `out`.
pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<Outcome> {
    let rows = gradcheck_rows(cfg)?;
    if let Some(p) = cfg.run.out.as_deref() {
        gradcheck_table(&rows).emit(Some(p))?;
    }
    Ok(Outcome {
        report: gradcheck_report(&rows),
        warnings: Vec::new(),
        failed: rows.iter().any(|r| r.status == CheckStatus::Fail),
    })
}

// fit

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStop {
    Converged,
    MaxIterations,
}

#[derive(Debug)]
pub struct FitTrace {
    pub rows: Vec<FitRow>,
    /// How the iteration ended; an error keeps the rows computed so far.
    pub stop: Result<FitStop>,
}

/// `½ Σᵢ (1/N) ‖u(tᵢ) − u*(tᵢ)‖²` over 11 evenly spaced times, with the
/// targets taken from the closed-form solution at θ* when there is one.
pub fn synthetic_loss(truth: &ProblemCatalogEntry, solver: &SolverConfig) -> Result<LossSpec> {
    let (t0, t1) = truth.problem.tspan;
    let times: Vec<f64> = (0..=10).map(|k| t0 + (t1 - t0) * k as f64 / 10.0).collect();
    let targets = match times
        .iter()
        .map(|&t| truth.analytic_solution(t))
        .collect::<Option<Vec<_>>>()
    {
        Some(t) => t,
        None => {
            let cfg = solver.clone().with_save(SaveMode::SaveAt(times.clone()));
            solve(&truth.problem, &cfg)?.states
        }
    };
    let w = 1.0 / times.len() as f64;
    Ok(LossSpec::squared_error(times.clone(), targets, vec![w; times.len()]))
}

/// Fixed-step gradient descent `θ ← θ − α ∇L`. `eval` returns the loss
/// and gradient at a point.
pub fn descend<F>(theta0: &[f64], alpha: f64, iterations: usize, gtol: f64, mut eval: F) -> FitTrace
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut theta = theta0.to_vec();
    let mut rows: Vec<FitRow> = Vec::new();
    let mut streak = 0;
    let stop = 'descent: {
        for k in 0..=iterations {
            let (loss, grad) = match eval(&theta) {
                Ok(v) => v,
                Err(e) => break 'descent Err(e),
            };
            let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if let Some(prev) = rows.last() {
                streak = if loss > prev.loss { streak + 1 } else { 0 };
            }
            rows.push(FitRow {
                iteration: k,
                theta: theta.clone(),
                loss,
                grad_norm,
            });
            if !loss.is_finite() || !grad_norm.is_finite() {
                break 'descent Err(Error::NonFiniteLoss { component: 0 });
            }
            if grad_norm <= gtol {
                break 'descent Ok(FitStop::Converged);
            }
            if streak >= DIVERGENCE_STREAK {
                break 'descent Err(Error::Divergence { iteration: k });
            }
            if k == iterations {
                break;
            }
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= alpha * g;
            }
        }
        Ok(FitStop::MaxIterations)
    };
    FitTrace { rows, stop }
}

/// Descent from the configured θ toward data generated at
/// `fit.theta_star`, using `fit.method` for the gradients.
pub fn run_fit(cfg: &RunConfig) -> Result<FitTrace> {
    let id = cfg.problem_id()?.unwrap_or(ProblemId::Harmonic);
    let start = cfg.entry(id)?;
    let truth = crate::problems::catalog(id, Some(cfg.fit.theta_star), cfg.problem.grid)?;
    let solver = cfg.solver_config(&start)?;
    let fixed = cfg.fixed_solver_config(&start)?;
    let method: GradientMethod = cfg.fit.method.parse()?;
    let loss = synthetic_loss(&truth, &solver)?;
    let eval = |theta: &[f64]| {
        let problem = start.problem.reparametrized(theta)?;
        let r = method.run(&problem, &loss, &solver, &fixed)?;
        Ok((r.loss, r.gradient))
    };
    Ok(descend(
        &start.problem.params,
        cfg.fit.alpha,
        cfg.fit.iterations,
        cfg.fit.gtol,
        eval,
    ))
}

pub fn fit_table(rows: &[FitRow]) -> Table {
    let p = rows.first().map_or(1, |r| r.theta.len());
    let theta_cols: Vec<String> = if p == 1 {
        vec!["theta".into()]
    } else {
        (0..p).map(|i| format!("theta_{i}")).collect()
    };
    let mut header = vec!["iteration".to_string()];
    header.extend(theta_cols);
    header.extend(["loss".to_string(), "grad_norm".to_string()]);
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for r in rows {
        let mut row = vec![r.iteration.to_string()];
        row.extend(r.theta.iter().map(|&x| real(x)));
        row.extend([real(r.loss), real(r.grad_norm)]);
        t.push(row);
    }
    t
}

/// The trace is written even when the descent diverges.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Outcome> {
    let trace = run_fit(cfg)?;
    fit_table(&trace.rows).emit(cfg.run.out.as_deref())?;
    let stop = trace.stop?;
    let last = trace.rows.last().expect("at least one iteration");
    Ok(Outcome {
        report: vec![format!(
            "fit: {:?} after {} iterations, theta = {}, loss = {:.3e}",
            stop,
            last.iteration,
            reals(&last.theta),
            last.loss
        )],
        ..Outcome::default()
    })
}
