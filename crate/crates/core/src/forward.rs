//! Continuous forward sensitivity analysis: the state and the `n × p`
//! sensitivity `s = ∂u/∂θ` are integrated together,
//! `ds/dt = (∂f/∂u) s + ∂f/∂θ`.

use crate::error::{check_dim, Result};
use crate::linalg::Matrix;
use crate::problem::{pointwise_form, LossSpec, OdeProblem, SensitivityResult, WorkStats};
use crate::scalar::MultiDual;
use crate::solvers::{integrate, FnSystem, SaveMode, SolverConfig};

/// State plus sensitivity, flattened as `u` followed by the columns of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub u: Vec<f64>,
    pub s: Matrix,
}

impl AugmentedState {
    pub fn flatten(&self) -> Vec<f64> {
        let mut z = self.u.clone();
        for j in 0..self.s.cols() {
            z.extend(self.s.col(j));
        }
        z
    }

    pub fn unflatten(z: &[f64], n: usize, p: usize) -> Self {
        let mut s = Matrix::zeros(n, p);
        for j in 0..p {
            for i in 0..n {
                s[(i, j)] = z[n + j * n + i];
            }
        }
        Self { u: z[..n].to_vec(), s }
    }
}

/// `(∂f/∂u, ∂f/∂θ)` by seeding `n + p` dual directions through one
/// right-hand-side evaluation.
pub fn jacobian_assembly_ad(problem: &OdeProblem, u: &[f64], theta: &[f64], t: f64) -> (Matrix, Matrix) {
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
    let mut du = vec![MultiDual::constant(0.0); n];
    problem.field.eval_multidual(t, &ud, &pd, &mut du);
    let mut ju = Matrix::zeros(n, n);
    let mut jp = Matrix::zeros(n, p);
    for (i, d) in du.iter().enumerate() {
        for c in 0..n {
            ju[(i, c)] = d.tangent(c);
        }
        for c in 0..p {
            jp[(i, c)] = d.tangent(n + c);
        }
    }
    (ju, jp)
}

/// Analytic Jacobians when the problem carries them, dual-number assembly
/// otherwise.
pub fn jacobian_assembly(problem: &OdeProblem, u: &[f64], theta: &[f64], t: f64) -> (Matrix, Matrix) {
    match (&problem.jac_u, &problem.jac_p) {
        (Some(ju), Some(jp)) => (ju(t, u, theta), jp(t, u, theta)),
        _ => jacobian_assembly_ad(problem, u, theta, t),
    }
}

/// `(f, (∂f/∂u) s + ∂f/∂θ)`.
pub fn sensitivity_rhs(
    u: &[f64],
    s: &Matrix,
    theta: &[f64],
    t: f64,
    problem: &OdeProblem,
) -> Result<(Vec<f64>, Matrix)> {
    check_dim("state", problem.n(), u.len())?;
    check_dim("sensitivity rows", problem.n(), s.rows())?;
    check_dim("sensitivity cols", theta.len(), s.cols())?;
    let mut du = vec![0.0; u.len()];
    problem.field.eval_f64(t, u, theta, &mut du);
    let (ju, jp) = jacobian_assembly(problem, u, theta, t);
    let mut ds = ju.matmul(s);
    for i in 0..ds.rows() {
        for j in 0..ds.cols() {
            ds[(i, j)] += jp[(i, j)];
        }
    }
    Ok((du, ds))
}

/// Gradient of `loss` by integrating the `n(p+1)` augmented system.
///
/// The adaptive controller sees every augmented coordinate, so the
/// sensitivities are held to the same tolerance as the state.
pub fn forward_sensitivity(problem: &OdeProblem, loss: &LossSpec, config: &SolverConfig) -> Result<SensitivityResult> {
    let (prob, loss) = pointwise_form(problem, loss);
    loss.validate(prob.n(), prob.tspan)?;
    let (n, p) = (prob.n(), prob.p());
    let theta = prob.params.clone();
    let sys = FnSystem {
        dim: n * (p + 1),
        f: |t: f64, z: &[f64], dz: &mut [f64]| -> Result<()> {
            let u = &z[..n];
            prob.field.eval_f64(t, u, &theta, &mut dz[..n]);
            let (ju, jp) = jacobian_assembly(&prob, u, &theta, t);
            for j in 0..p {
                let sj = &z[n + j * n..n + (j + 1) * n];
                let out = ju.mul_vec(sj);
                for i in 0..n {
                    dz[n + j * n + i] = out[i] + jp[(i, j)];
                }
            }
            Ok(())
        },
    };
    let z0 = AugmentedState {
        u: prob.u0.clone(),
        s: prob.initial_sensitivity(),
    }
    .flatten();
    let sol = integrate(&sys, config, prob.tspan.0, prob.tspan.1, z0)?;

    let mut gradient = vec![0.0; p];
    let mut value = 0.0;
    for (i, &t) in loss.observation_times().iter().enumerate() {
        let aug = AugmentedState::unflatten(&sol.state_at(t)?, n, p);
        value += loss.observation_term(i, &aug.u);
        let g = loss.observation_grad(i, &aug.u);
        for (acc, v) in gradient.iter_mut().zip(aug.s.tr_mul_vec(&g)) {
            *acc += v;
        }
    }

    let n_out = problem.n();
    let trajectory: Vec<(f64, Matrix)> = match &config.save {
        SaveMode::FinalOnly => vec![(sol.times[0], sol.states[0].clone())],
        _ => sol.times.iter().cloned().zip(sol.states.iter().cloned()).collect(),
    }
    .into_iter()
    .map(|(t, z)| {
        let s = AugmentedState::unflatten(&z, n, p).s;
        let s = Matrix::from_rows(&s.to_rows()[..n_out]);
        (t, s)
    })
    .collect();

    let mut stats = WorkStats::default();
    stats.absorb(&sol.stats);
    stats.peak_stored_states = sol.nodes.len();
    Ok(SensitivityResult {
        gradient,
        loss: value,
        sensitivity_trajectory: Some(trajectory),
        method: "ForwardSensitivity".into(),
        stats,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::VectorField;
    use crate::problems::make_harmonic;
    use crate::scalar::Scalar;
    use std::sync::Arc;

    struct Linear;
    impl VectorField for Linear {
        // f = A u + B θ
        fn eval<T: Scalar>(&self, _t: f64, u: &[T], p: &[T], du: &mut [T]) {
            du[0] = u[0].clone() * 2.0 - u[1].clone() + p[0].clone() * 3.0;
            du[1] = u[0].clone() * 0.5 + p[1].clone() * -1.0 + p[0].clone();
        }
    }

    struct Constant;
    impl VectorField for Constant {
        fn eval<T: Scalar>(&self, _t: f64, _u: &[T], _p: &[T], du: &mut [T]) {
            du[0] = T::from_f64(1.0);
        }
    }

    #[test]
    fn linear_jacobians_recovered_exactly() {
        let pr = OdeProblem::new(Linear, vec![0.0, 0.0], vec![0.1, 0.2], (0.0, 1.0)).unwrap();
        let (ju, jp) = jacobian_assembly(&pr, &[0.7, -0.3], &[0.1, 0.2], 0.0);
        assert_eq!(ju, Matrix::from_rows(&[vec![2.0, -1.0], vec![0.5, 0.0]]));
        assert_eq!(jp, Matrix::from_rows(&[vec![3.0, 0.0], vec![1.0, -1.0]]));
    }

    #[test]
    fn analytic_jacobians_are_used_verbatim() {
        let pr = OdeProblem::new(Constant, vec![0.0], vec![1.0], (0.0, 1.0))
            .unwrap()
            .with_jacobians(
                Arc::new(|_, _, _| Matrix::from_rows(&[vec![42.0]])),
                Arc::new(|_, _, _| Matrix::from_rows(&[vec![-7.0]])),
            );
        let (ju, jp) = jacobian_assembly(&pr, &[0.0], &[1.0], 0.0);
        assert_eq!(ju[(0, 0)], 42.0);
        assert_eq!(jp[(0, 0)], -7.0);
    }

    #[test]
    fn harmonic_parameter_jacobian() {
        let e = make_harmonic(0.2).unwrap();
        let (_, jp) = jacobian_assembly_ad(&e.problem, &[1.0, 0.0], &[0.2], 0.0);
        assert!((jp[(0, 0)] - 0.0).abs() < 1e-15);
        assert!((jp[(1, 0)] - (-0.4)).abs() < 1e-15);
    }

    #[test]
    fn sensitivity_rhs_cases() {
        let pr = OdeProblem::new(Constant, vec![0.0], vec![1.0], (0.0, 1.0)).unwrap();
        let (du, ds) = sensitivity_rhs(&[5.0], &Matrix::from_rows(&[vec![2.0]]), &[1.0], 0.0, &pr).unwrap();
        assert_eq!(du, vec![1.0]);
        assert_eq!(ds[(0, 0)], 0.0);

        let e = make_harmonic(0.2).unwrap();
        let s = Matrix::from_rows(&[vec![0.3], vec![-0.5]]);
        let u = [1.5, 0.25];
        let (du, ds) = sensitivity_rhs(&u, &s, &[0.2], 0.0, &e.problem).unwrap();
        assert_eq!(du[0], 0.25);
        assert!((du[1] + 0.06).abs() < 1e-16);
        // [[0,1],[-θ²,0]] s + [0, -2θu₁]
        assert!((ds[(0, 0)] - (-0.5)).abs() < 1e-15);
        assert!((ds[(1, 0)] - (-0.04 * 0.3 - 0.4 * 1.5)).abs() < 1e-15);

        let pr = OdeProblem::new(Linear, vec![0.0, 0.0], vec![0.0, 0.0], (0.0, 1.0)).unwrap();
        let (_, ds) = sensitivity_rhs(&[0.0, 0.0], &Matrix::zeros(2, 2), &[0.0, 0.0], 0.0, &pr).unwrap();
        assert_eq!(ds.col(1), vec![0.0, -1.0]);
    }

    #[test]
    fn augmented_layout_round_trips() {
        let a = AugmentedState {
            u: vec![1.0, 2.0],
            s: Matrix::from_rows(&[vec![3.0, 5.0], vec![4.0, 6.0]]),
        };
        let z = a.flatten();
        assert_eq!(z, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(AugmentedState::unflatten(&z, 2, 2), a);
    }
}
