use crate::error::{check_dim, Error, Result};
use crate::problem::{pointwise_form, LossSpec, OdeProblem, SensitivityResult, WorkStats};
use crate::scalar::{MultiDual, Scalar};
use crate::solvers::{rk_step, ButcherTableau, FieldSystem};

use super::storage::{forward_pass, Keep, StateSource};
use super::AdjointConfig;

/// `((∂Φ/∂u)ᵀλ, (∂Φ/∂θ)ᵀλ)` for the one-step map `Φ(u, θ)` of `tableau`.
///
/// The step is run once on dual numbers carrying `n + p` tangents, which
/// yields both Jacobians in full.
pub fn step_vjp(
    problem: &OdeProblem,
    tableau: &ButcherTableau,
    u: &[f64],
    theta: &[f64],
    t: f64,
    dt: f64,
    lambda: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, p) = (problem.n(), theta.len());
    check_dim("state", n, u.len())?;
    check_dim("adjoint", n, lambda.len())?;
    let k = n + p;
    let ud: Vec<MultiDual> = u
        .iter()
        .enumerate()
        .map(|(i, &x)| MultiDual::variable(x, i, k))
        .collect();
    let sys = FieldSystem {
        field: problem.field.as_ref(),
        params: theta
            .iter()
            .enumerate()
            .map(|(j, &x)| MultiDual::variable(x, n + j, k))
            .collect(),
        n,
    };
    let st = rk_step(tableau, &sys, t, &ud, dt, None)?;
    let mut out = vec![0.0; k];
    for (phi, l) in st.u_next.iter().zip(lambda) {
        if *l != 0.0 {
            for (o, d) in out.iter_mut().zip(phi.tangents()) {
                *o += l * d;
            }
        }
    }
    let g = out.split_off(n);
    Ok((out, g))
}

/// Reverse recursion over the solver's own fixed-step map:
/// `λₘ = (∂Φ/∂u)ᵀλₘ₊₁ + ∂ℓ/∂uᵐ`, `dL/dθ = Σ (∂Φ/∂θ)ᵀλₘ₊₁ + s(t0)ᵀλ₀`.
///
/// The result is the exact derivative of the discretized loss. Integrated
/// losses are handled through an appended quadrature state.
pub fn discrete_adjoint(problem: &OdeProblem, loss: &LossSpec, config: &AdjointConfig) -> Result<SensitivityResult> {
    config.validate()?;
    let cfg = &config.solver_config;
    if cfg.method.is_adaptive() {
        return Err(Error::UnsupportedConfiguration(
            "the discrete adjoint needs a fixed-step forward method (Euler or RK4)".into(),
        ));
    }
    let (prob, loss) = pointwise_form(problem, loss);
    loss.validate(prob.n(), prob.tspan)?;
    let keep = match config.checkpoint_count() {
        Some(k) => Keep::Checkpoints(k),
        None => Keep::All,
    };
    let mut fwd = forward_pass(&prob, &loss, cfg, keep, config.quadrature_order)?;
    let tab = cfg.method.tableau();
    let theta = prob.params.clone();
    let (n, p) = (prob.n(), prob.p());

    // observation gradients keyed by the node they sit on
    let mut seeds: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, u) in fwd.obs_states.iter().enumerate() {
        let node = fwd.obs_nodes[i].expect("fixed-grid observations sit on nodes");
        seeds.push((node, loss.observation_grad(i, u)));
    }
    let seed_at = |m: usize, lambda: &mut [f64]| {
        for (node, g) in &seeds {
            if *node == m {
                for (l, g) in lambda.iter_mut().zip(g) {
                    *l += g;
                }
            }
        }
    };

    let loss_value = fwd.loss;
    let steps = fwd.steps;
    let mut stats = WorkStats::default();
    stats.absorb(&fwd.stats);
    let source = StateSource::new(&prob, cfg, &mut fwd);

    let mut lambda = vec![0.0; n];
    let mut grad = vec![0.0; p];
    seed_at(steps, &mut lambda);
    let mut m = steps;
    for seg in (0..source.segments()).rev() {
        let nodes = source.rebuild_segment(seg)?;
        source.note_held(nodes.len());
        for w in nodes.windows(2).rev() {
            let (a, b) = (&w[0], &w[1]);
            let (l, g) = step_vjp(&prob, &tab, &a.u, &theta, a.t, b.t - a.t, &lambda)?;
            stats.rhs_evaluations += tab.stages();
            lambda = l;
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += v;
            }
            m -= 1;
            seed_at(m, &mut lambda);
        }
    }
    debug_assert_eq!(m, 0);
    let s0 = prob.initial_sensitivity();
    for (acc, v) in grad.iter_mut().zip(s0.tr_mul_vec(&lambda)) {
        *acc += v;
    }
    stats.rhs_evaluations += source.rhs_evaluations.get();
    stats.recomputed_steps = source.recomputed_steps.get();
    stats.peak_stored_states = source.peak_stored_states();
    Ok(SensitivityResult {
        gradient: grad,
        loss: loss_value,
        sensitivity_trajectory: None,
        method: "DiscreteAdjoint".into(),
        stats,
        warnings: Vec::new(),
    })
}
