//! Built-in problems with closed-form references.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problem::{LossSpec, OdeProblem, VectorField};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    Harmonic,
    PredPrey,
    Heat1d,
}

impl ProblemId {
    pub const ALL: [ProblemId; 3] = [ProblemId::Harmonic, ProblemId::PredPrey, ProblemId::Heat1d];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::Harmonic => "harmonic",
            ProblemId::PredPrey => "predprey",
            ProblemId::Heat1d => "heat1d",
        }
    }
}

impl std::str::FromStr for ProblemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" => Ok(ProblemId::Harmonic),
            "predprey" => Ok(ProblemId::PredPrey),
            "heat1d" => Ok(ProblemId::Heat1d),
            _ => Err(Error::Config(format!("unknown problem `{s}`"))),
        }
    }
}

/// A catalog problem together with its canonical loss and references.
#[derive(Debug, Clone)]
pub struct ProblemCatalogEntry {
    pub id: ProblemId,
    pub problem: OdeProblem,
    pub loss: LossSpec,
    /// Exact `dL/dθ` of the canonical loss, when a closed form exists.
    pub reference_gradient: Option<Vec<f64>>,
    /// Largest stable explicit-Euler step, for diffusion problems.
    pub stable_dt: Option<f64>,
    /// Whether integrating the state backwards in time is well behaved.
    pub reverse_stable: bool,
    /// Step used when a fixed-step method is requested without a `dt`.
    pub default_dt: f64,
    /// Grid size for `heat1d`, 0 otherwise.
    pub grid: usize,
}

impl ProblemCatalogEntry {
    pub fn theta(&self) -> f64 {
        self.problem.params[0]
    }

    /// Closed-form solution of the ODE, when known.
    pub fn analytic_solution(&self, t: f64) -> Option<Vec<f64>> {
        let th = self.theta();
        match self.id {
            ProblemId::Harmonic => Some(vec![(th * t).sin() / th, (th * t).cos()]),
            ProblemId::PredPrey if th == 1.0 => Some(vec![1.0, 1.0]),
            _ => None,
        }
    }

    /// The canonical loss as a closed-form function of θ, evaluated in any
    /// scalar kind. Only the harmonic oscillator has one.
    pub fn analytic_loss<T: Scalar>(&self, theta: T) -> Option<T> {
        match self.id {
            ProblemId::Harmonic => {
                let t1 = self.problem.tspan.1;
                Some((theta.clone() * t1).sin() / theta)
            }
            _ => None,
        }
    }
}

struct Harmonic;

impl VectorField for Harmonic {
    fn eval<T: Scalar>(&self, _t: f64, u: &[T], p: &[T], du: &mut [T]) {
        du[0] = u[1].clone();
        du[1] = -(p[0].clone() * p[0].clone() * u[0].clone());
    }
}

/// `u₁' = u₂`, `u₂' = −θ²u₁`, `u(0) = (0, 1)` on `[0, 10]`; loss `u₁(10)`.
pub fn make_harmonic(theta: f64) -> Result<ProblemCatalogEntry> {
    if theta == 0.0 || !theta.is_finite() {
        return Err(Error::SingularParameter(format!(
            "harmonic oscillator needs θ ≠ 0, got {theta}"
        )));
    }
    let t1 = 10.0;
    let problem = OdeProblem::new(Harmonic, vec![0.0, 1.0], vec![theta], (0.0, t1))?
        .named("harmonic")
        .with_jacobians(
            Arc::new(|_t, _u, p| Matrix::from_rows(&[vec![0.0, 1.0], vec![-p[0] * p[0], 0.0]])),
            Arc::new(|_t, u, p| Matrix::from_rows(&[vec![0.0], vec![-2.0 * p[0] * u[0]]])),
        );
    let grad = (t1 / theta) * (theta * t1).cos() - (theta * t1).sin() / (theta * theta);
    Ok(ProblemCatalogEntry {
        id: ProblemId::Harmonic,
        loss: LossSpec::component_at(t1, 0, 2),
        problem,
        reference_gradient: Some(vec![grad]),
        stable_dt: None,
        reverse_stable: true,
        default_dt: 1e-3,
        grid: 0,
    })
}

struct PredPrey;

impl VectorField for PredPrey {
    fn eval<T: Scalar>(&self, _t: f64, u: &[T], p: &[T], du: &mut [T]) {
        let a = p[0].clone();
        let uv = u[0].clone() * u[1].clone();
        du[0] = a.clone() * u[0].clone() - uv.clone();
        du[1] = uv - a * u[1].clone();
    }
}

/// Save grid `0:0.1:10`.
pub fn predprey_save_grid() -> Vec<f64> {
    (0..=100).map(|k| k as f64 / 10.0).collect()
}

/// `u₁' = a u₁ − u₁u₂`, `u₂' = −a u₂ + u₁u₂`, `u(0) = (1, 1)` on `[0, 10]`;
/// loss is the sum of both components over the save grid `0:0.1:10`.
///
/// At `a = 1` the state stays at `(1, 1)` and the sensitivity solves
/// `s' = [[0, −1], [1, 0]] s + (1, −1)`, giving `s₁ + s₂ = 2 − 2 cos t`.
pub fn make_predprey(a: f64) -> Result<ProblemCatalogEntry> {
    let problem = OdeProblem::new(PredPrey, vec![1.0, 1.0], vec![a], (0.0, 10.0))?
        .named("predprey")
        .with_jacobians(
            Arc::new(|_t, u, p| Matrix::from_rows(&[vec![p[0] - u[1], -u[0]], vec![u[1], u[0] - p[0]]])),
            Arc::new(|_t, u, _p| Matrix::from_rows(&[vec![u[0]], vec![-u[1]]])),
        );
    let grid = predprey_save_grid();
    let reference_gradient = (a == 1.0).then(|| vec![grid.iter().map(|t| 2.0 - 2.0 * t.cos()).sum::<f64>()]);
    Ok(ProblemCatalogEntry {
        id: ProblemId::PredPrey,
        loss: LossSpec::sum_at(grid, 2),
        problem,
        reference_gradient,
        stable_dt: None,
        reverse_stable: true,
        default_dt: 1e-3,
        grid: 0,
    })
}

struct Heat1d {
    inv_dx2: f64,
}

impl VectorField for Heat1d {
    fn eval<T: Scalar>(&self, _t: f64, u: &[T], p: &[T], du: &mut [T]) {
        let n = u.len();
        let d = p[0].clone() * self.inv_dx2;
        for m in 0..n {
            let left = if m > 0 { u[m - 1].clone() } else { T::zero() };
            let right = if m + 1 < n { u[m + 1].clone() } else { T::zero() };
            du[m] = d.clone() * (left + right - u[m].clone() * 2.0);
        }
    }
}

/// Interior node closest to `x = 0.5`.
pub fn heat_center_index(grid: usize) -> usize {
    (grid / 2).max(1) - 1
}

/// Separable solution `e^{−π²θt} sin(πx)` of the continuous problem.
pub fn heat_reference(x: f64, t: f64, theta: f64) -> f64 {
    (-PI * PI * theta * t).exp() * (PI * x).sin()
}

/// `∂/∂θ` of [`heat_reference`].
pub fn heat_reference_dtheta(x: f64, t: f64, theta: f64) -> f64 {
    -PI * PI * t * heat_reference(x, t, theta)
}

/// Method-of-lines heat equation `u_t = θ u_xx` on `[0, 1]` with zero
/// Dirichlet boundaries, `N − 1` interior nodes, initial profile
/// `sin(πx)`, on `[0, 0.5]`; loss is the center node at `t = 0.5`.
pub fn make_heat1d(grid: usize, theta: f64) -> Result<ProblemCatalogEntry> {
    make_heat1d_with_profile(grid, theta, |x| (PI * x).sin())
}

pub fn make_heat1d_with_profile(grid: usize, theta: f64, profile: impl Fn(f64) -> f64) -> Result<ProblemCatalogEntry> {
    if grid < 3 {
        return Err(Error::InvalidDimension {
            what: "heat grid (N >= 3)",
            expected: 3,
            got: grid,
        });
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "diffusivity must be positive, got {theta}"
        )));
    }
    let dx = 1.0 / grid as f64;
    let inv_dx2 = 1.0 / (dx * dx);
    let n = grid - 1;
    let u0: Vec<f64> = (1..grid).map(|m| profile(m as f64 * dx)).collect();
    let t1 = 0.5;
    let problem = OdeProblem::new(Heat1d { inv_dx2 }, u0, vec![theta], (0.0, t1))?
        .named("heat1d")
        .with_jacobians(
            Arc::new(move |_t, u, p| {
                let n = u.len();
                let mut j = Matrix::zeros(n, n);
                let d = p[0] * inv_dx2;
                for m in 0..n {
                    j[(m, m)] = -2.0 * d;
                    if m > 0 {
                        j[(m, m - 1)] = d;
                    }
                    if m + 1 < n {
                        j[(m, m + 1)] = d;
                    }
                }
                j
            }),
            Arc::new(move |_t, u, _p| {
                let n = u.len();
                let mut j = Matrix::zeros(n, 1);
                for m in 0..n {
                    let left = if m > 0 { u[m - 1] } else { 0.0 };
                    let right = if m + 1 < n { u[m + 1] } else { 0.0 };
                    j[(m, 0)] = (left - 2.0 * u[m] + right) * inv_dx2;
                }
                j
            }),
        );
    let stable = dx * dx / (2.0 * theta);
    Ok(ProblemCatalogEntry {
        id: ProblemId::Heat1d,
        loss: LossSpec::component_at(t1, heat_center_index(grid), n),
        problem,
        reference_gradient: None,
        stable_dt: Some(stable),
        reverse_stable: false,
        default_dt: (0.5 * stable).min(1e-3),
        grid,
    })
}

/// Default construction by id: harmonic θ = 0.2, predprey a = 1, heat1d
/// N = 32, θ = 0.1.
pub fn catalog(id: ProblemId, theta: Option<f64>, grid: Option<usize>) -> Result<ProblemCatalogEntry> {
    match id {
        ProblemId::Harmonic => make_harmonic(theta.unwrap_or(0.2)),
        ProblemId::PredPrey => make_predprey(theta.unwrap_or(1.0)),
        ProblemId::Heat1d => make_heat1d(grid.unwrap_or(32), theta.unwrap_or(0.1)),
    }
}
