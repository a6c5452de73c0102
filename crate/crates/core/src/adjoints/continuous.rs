//! Continuous adjoint, integrated in reverse time `s = t1 − t` so the
//! stepper always runs forward:
//!
//! ```text
//! dλ/ds = (∂f/∂u)ᵀλ + (∂h/∂u)ᵀ        λ(s = 0) = 0
//! dG/ds = (∂f/∂θ)ᵀλ + (∂h/∂θ)ᵀ        G(s = 0) = 0
//! dL/dθ = G(t0) + s(t0)ᵀλ(t0)
//! ```
//!
//! Pointwise observations enter as jumps `λ ← λ + ∂ℓᵢ/∂u` at each `tᵢ`.

use crate::error::{Error, Result};
use crate::forward::jacobian_assembly;
use crate::linalg::Matrix;
use crate::problem::{
    integrand_partials, node_tolerance, LossSpec, Node, OdeProblem, SensitivityResult, SolverStats, WorkStats,
};
use crate::solvers::{hermite, integrate, FnSystem, SaveMode, SolverConfig};

use super::quadrature::{gauss_legendre_rule, integrate_with};
use super::storage::{forward_pass, Keep, StateSource};
use super::{AdjointConfig, AdjointState, AdjointVariant};

/// Forward-time adjoint right-hand side:
/// `dλ/dt = −(∂f/∂u)ᵀλ − (∂h/∂u)ᵀ` and the gradient integrand
/// `(∂h/∂θ)ᵀ + (∂f/∂θ)ᵀλ`. Pointwise losses have `h = 0`.
pub fn adjoint_rhs(
    u: &[f64],
    lambda: &[f64],
    theta: &[f64],
    t: f64,
    problem: &OdeProblem,
    loss: &LossSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (ju, jp) = jacobian_assembly(problem, u, theta, t);
    let mut dl: Vec<f64> = ju.tr_mul_vec(lambda).into_iter().map(|x| -x).collect();
    let mut dg = jp.tr_mul_vec(lambda);
    if let LossSpec::Integrated { integrand } = loss {
        let (_, hu, hp) = integrand_partials(integrand.as_ref(), t, u, theta);
        for (d, h) in dl.iter_mut().zip(hu) {
            *d -= h;
        }
        for (d, h) in dg.iter_mut().zip(hp) {
            *d += h;
        }
    }
    Ok((dl, dg))
}

/// Where the reverse pass gets `u(t)` from.
enum Primal<'a> {
    /// Co-integrated backwards as the leading `n` entries of the state.
    Backsolve,
    /// Recorded at each observation time during the forward pass.
    Observed(&'a [Vec<f64>]),
}

struct Sweep {
    state: Vec<f64>,
    /// Reverse-time nodes of every segment, when requested.
    segments: Vec<Vec<Node<f64>>>,
    stats: SolverStats,
}

/// Integrates `sys` from `s = 0` to `t1 − t0`, stopping at every
/// observation time to apply its jump to the `λ` block at `offset`.
#[allow(clippy::too_many_arguments)]
fn reverse_sweep<F>(
    problem: &OdeProblem,
    loss: &LossSpec,
    cfg: &SolverConfig,
    sys: &FnSystem<F>,
    mut z: Vec<f64>,
    offset: usize,
    primal: &Primal<'_>,
    keep_nodes: bool,
) -> Result<Sweep>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let (t0, t1) = problem.tspan;
    let n = problem.n();
    let span = t1 - t0;
    let tol = node_tolerance(problem.tspan);
    let times = loss.observation_times();
    let mut idx = times.len();
    let mut out = Sweep {
        state: Vec::new(),
        segments: Vec::new(),
        stats: SolverStats::default(),
    };
    let jump = |i: usize, z: &mut Vec<f64>| {
        let u = match primal {
            Primal::Backsolve => z[..n].to_vec(),
            Primal::Observed(obs) => obs[i].clone(),
        };
        for (l, g) in z[offset..offset + n].iter_mut().zip(loss.observation_grad(i, &u)) {
            *l += g;
        }
    };
    while idx > 0 && times[idx - 1] >= t1 - tol {
        idx -= 1;
        jump(idx, &mut z);
    }
    let mut s = 0.0;
    loop {
        let interior = idx > 0 && times[idx - 1] > t0 + tol;
        let target = if interior { t1 - times[idx - 1] } else { span };
        if target > s {
            let sol = integrate(sys, cfg, s, target, z)?;
            out.stats += sol.stats;
            z = sol.final_state().to_vec();
            if keep_nodes {
                out.segments.push(sol.nodes);
            }
            s = target;
        }
        if !interior {
            while idx > 0 {
                idx -= 1;
                jump(idx, &mut z);
            }
            break;
        }
        idx -= 1;
        jump(idx, &mut z);
    }
    out.state = z;
    Ok(out)
}

fn reverse_config(config: &AdjointConfig) -> SolverConfig {
    let mut c = config.reverse.clone().unwrap_or_else(|| config.solver_config.clone());
    c.save = SaveMode::FinalOnly;
    c.checkpoints = None;
    c
}

fn finish(problem: &OdeProblem, adj: AdjointState, loss: f64, method: &str, stats: WorkStats) -> SensitivityResult {
    let s0: Matrix = problem.initial_sensitivity();
    let gradient = adj
        .g_accum
        .iter()
        .zip(s0.tr_mul_vec(&adj.lambda))
        .map(|(g, l)| g + l)
        .collect();
    SensitivityResult {
        gradient,
        loss,
        sensitivity_trajectory: None,
        method: method.into(),
        stats,
        warnings: Vec::new(),
    }
}

fn backsolve_failure(e: Error) -> Error {
    match e {
        Error::NumericalBlowup { t, dt, .. } | Error::StepsizeUnderflow { t, dt } => Error::NumericalBlowup {
            t,
            dt,
            hint: "reverse integration of the state is unstable here; use the ContinuousInterpolating variant".into(),
        },
        Error::NonConvergence { t, .. } => Error::NumericalBlowup {
            t,
            dt: f64::NAN,
            hint: "reverse integration of the state did not finish; use the ContinuousInterpolating variant".into(),
        },
        e => e,
    }
}

/// Continuous adjoint gradient in the Backsolve, Interpolating or
/// Quadrature variant.
pub fn continuous_adjoint(problem: &OdeProblem, loss: &LossSpec, config: &AdjointConfig) -> Result<SensitivityResult> {
    config.validate()?;
    loss.validate(problem.n(), problem.tspan)?;
    let (n, p) = (problem.n(), problem.p());
    let t1 = problem.tspan.1;
    let theta = problem.params.clone();
    let rcfg = reverse_config(config);
    let fcfg = &config.solver_config;
    let mut stats = WorkStats::default();

    match config.variant {
        AdjointVariant::Discrete => Err(Error::UnsupportedConfiguration(
            "use discrete_adjoint for the discrete variant".into(),
        )),
        AdjointVariant::ContinuousBacksolve => {
            let fwd = forward_pass(problem, loss, fcfg, Keep::Nothing, config.quadrature_order)?;
            stats.absorb(&fwd.stats);
            let sys = FnSystem {
                dim: 2 * n + p,
                f: |s: f64, z: &[f64], dz: &mut [f64]| -> Result<()> {
                    let t = t1 - s;
                    let u = &z[..n];
                    problem.field.eval_f64(t, u, &theta, &mut dz[..n]);
                    dz[..n].iter_mut().for_each(|d| *d = -*d);
                    let (dl, dg) = adjoint_rhs(u, &z[n..2 * n], &theta, t, problem, loss)?;
                    for (d, v) in dz[n..2 * n].iter_mut().zip(dl) {
                        *d = -v;
                    }
                    dz[2 * n..].copy_from_slice(&dg);
                    Ok(())
                },
            };
            let mut z0 = fwd.final_state.clone();
            z0.resize(2 * n + p, 0.0);
            let sweep = reverse_sweep(problem, loss, &rcfg, &sys, z0, n, &Primal::Backsolve, false)
                .map_err(backsolve_failure)?;
            stats.absorb(&sweep.stats);
            stats.peak_stored_states = 2;
            let adj = AdjointState {
                lambda: sweep.state[n..2 * n].to_vec(),
                g_accum: sweep.state[2 * n..].to_vec(),
            };
            Ok(finish(problem, adj, fwd.loss, "ContinuousBacksolve", stats))
        }
        AdjointVariant::ContinuousInterpolating | AdjointVariant::ContinuousQuadrature => {
            let keep = match config.checkpoint_count() {
                Some(k) => Keep::Checkpoints(k),
                None => Keep::All,
            };
            let mut fwd = forward_pass(problem, loss, fcfg, keep, config.quadrature_order)?;
            stats.absorb(&fwd.stats);
            let obs = std::mem::take(&mut fwd.obs_states);
            let source = StateSource::new(problem, fcfg, &mut fwd);
            let primal = Primal::Observed(&obs);

            let (adj, method) = if config.variant == AdjointVariant::ContinuousInterpolating {
                let sys = FnSystem {
                    dim: n + p,
                    f: |s: f64, z: &[f64], dz: &mut [f64]| -> Result<()> {
                        let t = t1 - s;
                        let u = source.at(t)?;
                        let (dl, dg) = adjoint_rhs(&u, &z[..n], &theta, t, problem, loss)?;
                        for (d, v) in dz[..n].iter_mut().zip(dl) {
                            *d = -v;
                        }
                        dz[n..].copy_from_slice(&dg);
                        Ok(())
                    },
                };
                let sweep = reverse_sweep(problem, loss, &rcfg, &sys, vec![0.0; n + p], 0, &primal, false)?;
                stats.absorb(&sweep.stats);
                let adj = AdjointState {
                    lambda: sweep.state[..n].to_vec(),
                    g_accum: sweep.state[n..].to_vec(),
                };
                (adj, "ContinuousInterpolating")
            } else {
                let sys = FnSystem {
                    dim: n,
                    f: |s: f64, z: &[f64], dz: &mut [f64]| -> Result<()> {
                        let t = t1 - s;
                        let u = source.at(t)?;
                        let (dl, _) = adjoint_rhs(&u, z, &theta, t, problem, loss)?;
                        for (d, v) in dz.iter_mut().zip(dl) {
                            *d = -v;
                        }
                        Ok(())
                    },
                };
                let sweep = reverse_sweep(problem, loss, &rcfg, &sys, vec![0.0; n], 0, &primal, true)?;
                stats.absorb(&sweep.stats);
                let held: usize = sweep.segments.iter().map(Vec::len).sum();
                source.note_held(held);
                let rule = gauss_legendre_rule(config.quadrature_order)?;
                let mut g = vec![0.0; p];
                for seg in &sweep.segments {
                    for w in seg.windows(2) {
                        let part = integrate_with(
                            &rule,
                            |s| {
                                let lam = hermite(&w[0], &w[1], s);
                                let t = t1 - s;
                                let u = source.at(t)?;
                                Ok(adjoint_rhs(&u, &lam, &theta, t, problem, loss)?.1)
                            },
                            w[0].t,
                            w[1].t,
                        )?;
                        for (a, v) in g.iter_mut().zip(part) {
                            *a += v;
                        }
                    }
                }
                let adj = AdjointState {
                    lambda: sweep.state,
                    g_accum: g,
                };
                (adj, "ContinuousQuadrature")
            };
            stats.rhs_evaluations += source.rhs_evaluations.get();
            stats.recomputed_steps = source.recomputed_steps.get();
            stats.peak_stored_states = source.peak_stored_states();
            Ok(finish(problem, adj, fwd.loss, method, stats))
        }
    }
}
