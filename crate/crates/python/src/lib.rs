//! Python bindings: catalog problems, gradient methods by label, dual
//! numbers and the bench commands.

use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use sensikit::bench::{self, GradientMethod, RunConfig};
use sensikit::problems::{catalog, ProblemCatalogEntry, ProblemId};
use sensikit::scalar::{dual_arith, dual_lift, BinaryOp, UnaryFn};
use sensikit::{solve, Dual, Error, Method, SolverConfig};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::ArithmeticDomain(_) | Error::NonSmoothPoint { .. } => PyArithmeticError::new_err(e.to_string()),
        e if e.is_numerical() => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn solver_config(method: &str, tol: f64, dt: Option<f64>, norm: &str) -> Result<SolverConfig, Error> {
    let method: Method = method.parse()?;
    let mut cfg = SolverConfig::adaptive(tol).with_norm(bench::parse_norm(norm)?);
    cfg.method = method;
    cfg.dt = dt;
    cfg.validate()?;
    Ok(cfg)
}

/// A catalog problem with its canonical loss.
#[pyclass(name = "Problem", module = "pysensikit", frozen)]
struct PyProblem {
    entry: ProblemCatalogEntry,
}

/// Outcome of one gradient computation.
#[pyclass(name = "Gradient", module = "pysensikit", frozen, get_all)]
struct PyGradient {
    method: String,
    gradient: Vec<f64>,
    loss: f64,
    rhs_evaluations: usize,
    peak_stored_states: usize,
    warnings: Vec<String>,
}

#[pymethods]
impl PyGradient {
    fn __repr__(&self) -> String {
        format!(
            "Gradient(method={:?}, gradient={:?}, loss={})",
            self.method, self.gradient, self.loss
        )
    }
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (id, theta=None, grid=None))]
    fn new(id: &str, theta: Option<f64>, grid: Option<usize>) -> PyResult<Self> {
        let id: ProblemId = id.parse().map_err(to_py)?;
        let entry = catalog(id, theta, grid).map_err(to_py)?;
        Ok(Self { entry })
    }

    #[getter]
    fn id(&self) -> &'static str {
        self.entry.id.as_str()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.entry.theta()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.entry.problem.u0.len()
    }

    #[getter]
    fn tspan(&self) -> (f64, f64) {
        self.entry.problem.tspan
    }

    #[getter]
    fn reference_gradient(&self) -> Option<Vec<f64>> {
        self.entry.reference_gradient.clone()
    }

    #[getter]
    fn stable_dt(&self) -> Option<f64> {
        self.entry.stable_dt
    }

    #[getter]
    fn reverse_stable(&self) -> bool {
        self.entry.reverse_stable
    }

    /// Closed-form state at `t`, when one exists.
    fn analytic_solution(&self, t: f64) -> Option<Vec<f64>> {
        self.entry.analytic_solution(t)
    }

    /// Integrates the problem; returns `(times, states)`.
    #[pyo3(signature = (method="dp5", tol=1e-9, dt=None, norm="joint"))]
    fn solve(&self, method: &str, tol: f64, dt: Option<f64>, norm: &str) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let cfg = solver_config(method, tol, dt, norm).map_err(to_py)?;
        let sol = solve(&self.entry.problem, &cfg).map_err(to_py)?;
        Ok((sol.times, sol.states))
    }

    /// `dL/dθ` of the canonical loss by the named method, e.g.
    /// `"ForwardAD"`, `"CenteredFD"` or `"ContinuousInterpolating"`.
    #[pyo3(signature = (method, tol=1e-9, solver="dp5", dt=None, norm="joint"))]
    fn gradient(&self, method: &str, tol: f64, solver: &str, dt: Option<f64>, norm: &str) -> PyResult<PyGradient> {
        let m: GradientMethod = method.parse().map_err(to_py)?;
        let cfg = solver_config(solver, tol, dt, norm).map_err(to_py)?;
        let fixed = if cfg.method.is_adaptive() {
            SolverConfig::fixed(Method::Rk4, dt.unwrap_or(self.entry.default_dt))
        } else {
            cfg.clone()
        };
        let r = m
            .run(&self.entry.problem, &self.entry.loss, &cfg, &fixed)
            .map_err(to_py)?;
        Ok(PyGradient {
            method: r.method,
            gradient: r.gradient,
            loss: r.loss,
            rhs_evaluations: r.stats.rhs_evaluations,
            peak_stored_states: r.stats.peak_stored_states,
            warnings: r.warnings,
        })
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?}, theta={})", self.id(), self.theta())
    }
}

/// `value + ε·tangent` with `ε² = 0`.
#[pyclass(name = "Dual", module = "pysensikit", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyDual(Dual);

#[derive(FromPyObject)]
enum Operand {
    Dual(PyDual),
    Real(f64),
}

impl Operand {
    fn dual(self) -> Dual {
        match self {
            Operand::Dual(d) => d.0,
            Operand::Real(x) => Dual::constant(x),
        }
    }
}

impl PyDual {
    fn op(a: Dual, b: Dual, op: BinaryOp) -> PyResult<Self> {
        dual_arith(a, b, op).map(Self).map_err(to_py)
    }

    fn lift(&self, f: UnaryFn) -> PyResult<Self> {
        dual_lift(self.0, f).map(Self).map_err(to_py)
    }
}

#[pymethods]
impl PyDual {
    #[new]
    #[pyo3(signature = (value, tangent=0.0))]
    fn new(value: f64, tangent: f64) -> Self {
        Self(Dual::new(value, tangent))
    }

    #[getter]
    fn value(&self) -> f64 {
        self.0.value
    }

    #[getter]
    fn tangent(&self) -> f64 {
        self.0.tangent
    }

    fn __add__(&self, o: Operand) -> PyResult<Self> {
        Self::op(self.0, o.dual(), BinaryOp::Add)
    }
    fn __radd__(&self, o: Operand) -> PyResult<Self> {
        Self::op(o.dual(), self.0, BinaryOp::Add)
    }
    fn __sub__(&self, o: Operand) -> PyResult<Self> {
        Self::op(self.0, o.dual(), BinaryOp::Sub)
    }
    fn __rsub__(&self, o: Operand) -> PyResult<Self> {
        Self::op(o.dual(), self.0, BinaryOp::Sub)
    }
    fn __mul__(&self, o: Operand) -> PyResult<Self> {
        Self::op(self.0, o.dual(), BinaryOp::Mul)
    }
    fn __rmul__(&self, o: Operand) -> PyResult<Self> {
        Self::op(o.dual(), self.0, BinaryOp::Mul)
    }
    fn __truediv__(&self, o: Operand) -> PyResult<Self> {
        Self::op(self.0, o.dual(), BinaryOp::Div)
    }
    fn __rtruediv__(&self, o: Operand) -> PyResult<Self> {
        Self::op(o.dual(), self.0, BinaryOp::Div)
    }
    fn __neg__(&self) -> Self {
        Self(-self.0)
    }
    fn __pow__(&self, e: f64, _modulo: Option<Py<PyAny>>) -> PyResult<Self> {
        self.lift(UnaryFn::Pow(e))
    }
    fn __abs__(&self) -> PyResult<Self> {
        self.lift(UnaryFn::Abs)
    }

    fn sin(&self) -> PyResult<Self> {
        self.lift(UnaryFn::Sin)
    }
    fn cos(&self) -> PyResult<Self> {
        self.lift(UnaryFn::Cos)
    }
    fn exp(&self) -> PyResult<Self> {
        self.lift(UnaryFn::Exp)
    }
    fn log(&self) -> PyResult<Self> {
        self.lift(UnaryFn::Log)
    }
    fn sqrt(&self) -> PyResult<Self> {
        self.lift(UnaryFn::Sqrt)
    }

    fn __repr__(&self) -> String {
        format!("Dual({}, {})", self.0.value, self.0.tangent)
    }
}

/// Labels accepted by `Problem.gradient`.
#[pyfunction]
fn methods() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = GradientMethod::gradcheck_default()
        .into_iter()
        .map(GradientMethod::label)
        .collect();
    v.push("CenteredFD");
    v
}

/// Runs a bench command from a TOML configuration string. Returns the
/// report lines; the CSV goes to `run.out` when set.
#[pyfunction]
#[pyo3(signature = (command, config=""))]
fn run_bench(command: &str, config: &str) -> PyResult<Vec<String>> {
    let mut cfg = RunConfig::from_toml_str(config).map_err(to_py)?;
    cfg.run.command = Some(command.parse().map_err(to_py)?);
    let out = bench::run(&cfg).map_err(to_py)?;
    if out.failed {
        return Err(PyRuntimeError::new_err(out.report.join("\n")));
    }
    Ok(out.report)
}

#[pymodule]
fn pysensikit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyGradient>()?;
    m.add_class::<PyDual>()?;
    m.add_function(wrap_pyfunction!(methods, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
