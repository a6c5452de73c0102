use super::*;
use crate::error::Error;
use crate::problem::{OdeProblem, VectorField};
use crate::problems::{make_harmonic, make_predprey};
use crate::scalar::{MultiDual, Scalar};

#[allow(clippy::type_complexity)]
fn scalar_fn<F: Fn(f64, f64) -> f64>(f: F) -> FnSystem<impl Fn(f64, &[f64], &mut [f64]) -> crate::Result<()>> {
    FnSystem {
        dim: 1,
        f: move |t: f64, u: &[f64], du: &mut [f64]| {
            du[0] = f(t, u[0]);
            Ok(())
        },
    }
}

#[test]
fn single_steps_on_growth_equation() {
    let sys = scalar_fn(|_, u| u);
    let st = rk_step(&ButcherTableau::rk4(), &sys, 0.0, &[1.0], 0.1, None).unwrap();
    // 1 + h + h²/2 + h³/6 + h⁴/24
    assert!((st.u_next[0] - 1.105_170_833_333_333_3).abs() < 1e-15);
    assert_eq!(st.evaluations, 4);
    let st = rk_step(&ButcherTableau::euler(), &sys, 0.0, &[1.0], 0.1, None).unwrap();
    assert!((st.u_next[0] - 1.1).abs() < 1e-15);
}

#[test]
fn polynomial_in_time_is_integrated_exactly() {
    let sys = scalar_fn(|t, _| t);
    for method in [Method::Rk4, Method::Dp5] {
        let cfg = match method {
            Method::Dp5 => SolverConfig::adaptive(1e-10),
            m => SolverConfig::fixed(m, 0.25),
        };
        let sol = integrate(&sys, &cfg, 0.0, 2.0, vec![0.0]).unwrap();
        assert!((sol.final_state()[0] - 2.0).abs() < 1e-13, "{method:?}");
    }
}

#[test]
fn constant_solution_never_rejects() {
    let sys = scalar_fn(|_, _| 0.0);
    let sol = integrate(&sys, &SolverConfig::adaptive(1e-10), 0.0, 5.0, vec![3.0]).unwrap();
    assert_eq!(sol.final_state()[0], 3.0);
    assert_eq!(sol.stats.rejected_steps, 0);
}

#[test]
fn harmonic_error_tracks_tolerance() {
    let e = make_harmonic(0.2).unwrap();
    let exact = e.analytic_solution(10.0).unwrap();
    for tol in [1e-6, 1e-9, 1e-12] {
        let sol = solve(&e.problem, &SolverConfig::adaptive(tol)).unwrap();
        let err = (sol.final_state()[0] - exact[0]).abs();
        assert!(err <= 100.0 * tol, "tol {tol}: error {err}");
        assert!(sol.step_errors.iter().all(|&e| e <= 1.0));
    }
}

#[test]
fn predprey_equilibrium_is_preserved() {
    let e = make_predprey(1.0).unwrap();
    for cfg in [SolverConfig::adaptive(1e-8), SolverConfig::fixed(Method::Rk4, 0.1)] {
        let sol = solve(&e.problem, &cfg).unwrap();
        for u in &sol.states {
            assert!((u[0] - 1.0).abs() < 1e-14 && (u[1] - 1.0).abs() < 1e-14);
        }
    }
}

#[test]
fn rk4_convergence_order() {
    let e = make_harmonic(0.2).unwrap();
    let exact = e.analytic_solution(10.0).unwrap()[0];
    let err = |dt: f64| {
        let sol = solve(&e.problem, &SolverConfig::fixed(Method::Rk4, dt)).unwrap();
        (sol.final_state()[0] - exact).abs()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio}");
}

#[test]
fn fixed_grid_lands_on_end_time() {
    let sys = scalar_fn(|_, _| 1.0);
    let sol = integrate(&sys, &SolverConfig::fixed(Method::Euler, 0.3), 0.0, 1.0, vec![0.0]).unwrap();
    assert_eq!(sol.nodes.len(), 5);
    assert_eq!(sol.nodes.last().unwrap().t, 1.0);
    assert!((sol.final_state()[0] - 1.0).abs() < 1e-15);
    assert_eq!(fixed_step_count(0.0, 10.0, 0.1), 100);
}

#[test]
fn solves_are_deterministic() {
    let e = make_harmonic(0.37).unwrap();
    let a = solve(&e.problem, &SolverConfig::adaptive(1e-9)).unwrap();
    let b = solve(&e.problem, &SolverConfig::adaptive(1e-9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn norm_mode_changes_dual_step_sequence() {
    let e = make_harmonic(0.2).unwrap();
    let theta = vec![MultiDual::variable(0.2, 0, 1)];
    let run = |mode| {
        let cfg = SolverConfig::adaptive(1e-8).with_norm(mode);
        solve_scalar(&e.problem, &theta, &cfg).unwrap()
    };
    let primal = run(NormMode::PrimalOnly);
    let joint = run(NormMode::JointPrimalDual);
    let tp: Vec<f64> = primal.nodes.iter().map(|n| n.t).collect();
    let tj: Vec<f64> = joint.nodes.iter().map(|n| n.t).collect();
    assert_ne!(tp, tj);
    assert!(joint.stats.accepted_steps > primal.stats.accepted_steps);
}

#[test]
fn dual_solve_with_primal_norm_matches_real_solve() {
    let e = make_harmonic(0.2).unwrap();
    let cfg = SolverConfig::adaptive(1e-8).with_norm(NormMode::PrimalOnly);
    let real = solve(&e.problem, &cfg).unwrap();
    let dual = solve_scalar(&e.problem, &[MultiDual::variable(0.2, 0, 1)], &cfg).unwrap();
    assert_eq!(real.nodes.len(), dual.nodes.len());
    for (a, b) in real.nodes.iter().zip(&dual.nodes) {
        assert_eq!(a.t, b.t);
        assert_eq!(a.u[0], b.u[0].value());
    }
}

#[test]
fn dense_output_properties() {
    let e = make_harmonic(0.2).unwrap();
    let sol = solve(&e.problem, &SolverConfig::adaptive(1e-10)).unwrap();
    for n in &sol.nodes {
        assert_eq!(dense_eval(&sol, n.t).unwrap(), n.u);
    }
    let mut worst: f64 = 0.0;
    for w in sol.nodes.windows(2) {
        let tm = 0.5 * (w[0].t + w[1].t);
        let u = dense_eval(&sol, tm).unwrap();
        worst = worst.max((u[0] - e.analytic_solution(tm).unwrap()[0]).abs());
    }
    assert!(worst <= 1e-7, "midpoint error {worst}");
    assert!(matches!(dense_eval(&sol, 10.5), Err(Error::OutOfRange { .. })));

    let lin = scalar_fn(|_, _| 2.0);
    let sol = integrate(&lin, &SolverConfig::fixed(Method::Rk4, 0.5), 0.0, 2.0, vec![1.0]).unwrap();
    for t in [0.1, 0.77, 1.3, 1.99] {
        assert!((dense_eval(&sol, t).unwrap()[0] - (1.0 + 2.0 * t)).abs() < 1e-14);
    }
}

#[test]
fn checkpoint_plan_examples() {
    assert_eq!(checkpoint_plan((0.0, 10.0), 1).unwrap(), vec![0.0, 10.0]);
    assert_eq!(checkpoint_plan((0.0, 10.0), 4).unwrap(), vec![0.0, 2.5, 5.0, 7.5, 10.0]);
    let p = checkpoint_plan((0.0, 0.5), 16).unwrap();
    assert_eq!(p.len(), 17);
    assert_eq!(*p.last().unwrap(), 0.5);
    assert!(checkpoint_plan((0.0, 1.0), 0).is_err());
}

#[test]
fn checkpoint_replay_is_bit_exact() {
    let e = make_harmonic(0.2).unwrap();
    let cfg = SolverConfig::adaptive(1e-9);
    let sys = FieldSystem {
        field: e.problem.field.as_ref(),
        params: e.problem.params.clone(),
        n: 2,
    };
    let mut it = Integrator::new(&sys, &cfg, 0.0, 10.0, e.problem.u0.clone()).unwrap();
    let mut store = CheckpointStore::new((0.0, 10.0), 4).unwrap();
    store.offer(it.state());
    let mut nodes = vec![it.state().node()];
    while !it.is_done() {
        it.advance().unwrap();
        store.offer(it.state());
        nodes.push(it.state().node());
    }
    assert_eq!(store.snapshots.len(), 5);
    let snap = store.snapshots[2].clone();
    let start = nodes.iter().position(|n| n.t == snap.t).unwrap();
    let mut replay = Integrator::resume(&sys, &cfg, 0.0, 10.0, snap);
    for expected in &nodes[start + 1..] {
        replay.advance().unwrap();
        assert_eq!(&replay.state().node(), expected);
    }
    assert!(replay.is_done());
}

#[test]
fn stepsize_underflow_is_reported() {
    // finite-time blow-up at t = 1
    let sys = scalar_fn(|_, u| u * u);
    let r = integrate(&sys, &SolverConfig::adaptive(1e-8), 0.0, 2.0, vec![1.0]);
    assert!(
        matches!(
            r,
            Err(Error::StepsizeUnderflow { .. }) | Err(Error::NumericalBlowup { .. })
        ),
        "{r:?}"
    );
}

#[test]
fn step_budget_is_enforced() {
    let e = make_harmonic(0.2).unwrap();
    let cfg = SolverConfig {
        max_steps: 10,
        ..SolverConfig::adaptive(1e-10)
    };
    assert!(matches!(
        solve(&e.problem, &cfg),
        Err(Error::NonConvergence { max_steps: 10, .. })
    ));
}

#[test]
fn invalid_configs_rejected() {
    let e = make_harmonic(0.2).unwrap();
    let bad = [
        SolverConfig::adaptive(0.0),
        SolverConfig {
            dt: None,
            ..SolverConfig::fixed(Method::Rk4, 0.1)
        },
        SolverConfig::fixed(Method::Euler, -1.0),
    ];
    for cfg in bad {
        assert!(solve(&e.problem, &cfg).is_err(), "{cfg:?}");
    }
}

#[test]
fn save_modes() {
    struct Decay;
    impl VectorField for Decay {
        fn eval<T: Scalar>(&self, _t: f64, u: &[T], p: &[T], du: &mut [T]) {
            du[0] = -(p[0].clone() * u[0].clone());
        }
    }
    let pr = OdeProblem::new(Decay, vec![1.0], vec![0.5], (0.0, 2.0)).unwrap();
    let cfg = SolverConfig::adaptive(1e-10).with_save(SaveMode::SaveAt(vec![0.5, 1.0, 2.0]));
    let sol = solve(&pr, &cfg).unwrap();
    assert_eq!(sol.times, vec![0.5, 1.0, 2.0]);
    for (t, u) in sol.times.iter().zip(&sol.states) {
        assert!((u[0] - (-0.5 * t).exp()).abs() < 1e-8);
    }
    let sol = solve(&pr, &SolverConfig::adaptive(1e-6).with_save(SaveMode::FinalOnly)).unwrap();
    assert_eq!(sol.times, vec![2.0]);
}
