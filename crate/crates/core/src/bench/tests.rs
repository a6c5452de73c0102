use super::*;
use crate::error::Error;
use crate::problem::{LossSpec, OdeProblem, VectorField};
use crate::scalar::Scalar;
use crate::solvers::SolverConfig;

fn cfg(command: Command, problem: &str) -> RunConfig {
    let mut c = RunConfig::default();
    c.run.command = Some(command);
    c.problem.id = Some(problem.into());
    c
}

#[test]
fn sweep_rows_come_in_mode_method_epsilon_order() {
    let mut c = cfg(Command::SweepDirect, "harmonic");
    c.sweep.eps_min = 1e-12;
    c.sweep.eps_max = 1e-2;
    c.sweep.eps_count = 3;
    c.sweep.tolerances = vec![1e-8];
    let rows = sweep_direct_records(&c).unwrap();
    // 3 FD-like methods × 3 ε + ForwardAD, in two modes
    assert_eq!(rows.len(), 20);
    assert_eq!(rows[0].method, "ForwardFD:analytic");
    assert_eq!(rows[9].method, "ForwardAD:analytic");
    assert_eq!(rows[9].epsilon, 0.0);
    assert_eq!(rows[10].method, "ForwardFD:solver:reltol=1e-8");
    assert_eq!(rows[19].method, "ForwardAD:solver:reltol=1e-8");
    assert!(rows[9].abs_rel_error <= 1e-12);
    // ComplexStep at ε = 1e-12
    assert_eq!(rows[6].method, "ComplexStep:analytic");
    assert!(rows[6].abs_rel_error <= 1e-10);
    assert!(rows[..10].iter().all(|r| r.rhs_evaluations == 0));
    assert!(rows[10..].iter().all(|r| r.rhs_evaluations > 0));
    assert!(rows.iter().all(|r| r.abs_rel_error >= 0.0));
}

#[test]
fn sweep_needs_an_analytic_reference() {
    for (id, theta) in [("heat1d", None), ("predprey", Some(1.3))] {
        let mut c = cfg(Command::SweepDirect, id);
        c.problem.theta = theta;
        assert!(
            matches!(sweep_direct_records(&c), Err(Error::UnsupportedProblem(_))),
            "{id}"
        );
    }
}

#[test]
fn sweep_rejects_non_direct_methods() {
    let mut c = cfg(Command::SweepDirect, "harmonic");
    c.run.methods = vec!["DiscreteAdjoint".into()];
    assert!(matches!(sweep_direct_records(&c), Err(Error::Config(_))));
}

#[test]
fn predprey_sweep_runs_in_solver_mode_only() {
    let mut c = cfg(Command::SweepDirect, "predprey");
    c.sweep.eps_count = 2;
    c.sweep.tolerances = vec![1e-8];
    c.run.methods = vec!["ForwardAD".into(), "CenteredFD".into()];
    let rows = sweep_direct_records(&c).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.method.contains(":solver:")));
}

#[test]
fn harmonic_comparison_agrees_with_closed_form() {
    let c = cfg(Command::CompareAdjoints, "harmonic");
    let cmp = compare_adjoints_records(&c).unwrap();
    assert_eq!(cmp.reference_kind, "analytic");
    assert_eq!(cmp.records.len(), 5);
    for r in &cmp.records {
        assert_eq!(r.status, RowStatus::Ok, "{}", r.method);
        let g = r.gradient.as_ref().unwrap()[0];
        assert!((g - (-43.539778)).abs() < 1e-4, "{}: {g}", r.method);
        assert!(r.peak_stored_states > 0);
    }
    let table = compare_table(&cmp).to_csv_string().unwrap();
    assert!(table.starts_with("method,gradient,abs_rel_error,rhs_evaluations,peak_stored_states,status\n"));
}

#[test]
fn heat_backsolve_is_reported_not_raised() {
    let mut c = cfg(Command::CompareAdjoints, "heat1d");
    c.solver.abstol = 1e-8;
    c.solver.reltol = 1e-8;
    c.run.methods = vec!["ContinuousBacksolve".into(), "ContinuousInterpolating".into()];
    let cmp = compare_adjoints_records(&c).unwrap();
    assert_eq!(cmp.reference_kind, "CenteredFD");
    assert!(matches!(cmp.records[0].status, RowStatus::Skipped(_)));
    assert_eq!(cmp.records[1].status, RowStatus::Ok);
}

struct Decay;
impl VectorField for Decay {
    fn eval<T: Scalar>(&self, _t: f64, u: &[T], _p: &[T], du: &mut [T]) {
        du[0] = -u[0].clone();
    }
}

#[test]
fn parameterless_problem_passes_vacuously() {
    let pr = OdeProblem::new(Decay, vec![1.0], vec![], (0.0, 1.0)).unwrap();
    let loss = LossSpec::component_at(1.0, 0, 1);
    let s = SolverConfig::adaptive(1e-10);
    let rows = gradcheck_problem(
        "decay",
        &pr,
        &loss,
        &s,
        &s,
        &GradientMethod::gradcheck_default(),
        |_| None,
    )
    .unwrap();
    assert!(rows.is_empty());
    assert!(gradcheck_report(&rows).is_empty());
}

#[test]
fn primal_only_forward_ad_fails_gradcheck() {
    let mut c = cfg(Command::Gradcheck, "predprey");
    c.solver.norm = "primal-only".into();
    c.run.methods = vec!["ForwardAD".into(), "ForwardSensitivity".into()];
    let out = cmd_gradcheck(&c).unwrap();
    assert!(out.failed);
    let rows = gradcheck_rows(&c).unwrap();
    assert_eq!(rows[0].method, "ForwardAD-PrimalOnly");
    assert_eq!(rows[0].status, CheckStatus::Fail);
    assert_eq!(rows[1].status, CheckStatus::Pass);
    assert!(out.report[0].starts_with("FAIL predprey"));
}

#[test]
fn harmonic_gradcheck_passes_with_defaults() {
    let c = cfg(Command::Gradcheck, "harmonic");
    let rows = gradcheck_rows(&c).unwrap();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert_eq!(r.status, CheckStatus::Pass, "{} {}", r.method, r.rel_error);
    }
}

#[test]
fn descent_on_a_quadratic() {
    let quad = |th: &[f64]| Ok(((th[0] - 2.0).powi(2), vec![2.0 * (th[0] - 2.0)]));
    let tr = descend(&[0.0], 0.25, 1000, 1e-12, quad);
    assert_eq!(tr.stop.unwrap(), FitStop::Converged);
    assert!((tr.rows.last().unwrap().theta[0] - 2.0).abs() < 1e-12);

    let tr = descend(&[0.0], 0.0, 7, 1e-12, quad);
    assert_eq!(tr.stop.unwrap(), FitStop::MaxIterations);
    assert_eq!(tr.rows.len(), 8);
    assert!(tr.rows.iter().all(|r| r.theta[0] == 0.0));

    let tr = descend(&[2.0], 0.25, 1000, 1e-12, quad);
    assert_eq!(tr.stop.unwrap(), FitStop::Converged);
    assert_eq!(tr.rows.len(), 1);
}

#[test]
fn divergence_keeps_the_trace() {
    // θ ← θ − 1.5·2θ = −2θ, so the loss quadruples each step
    let tr = descend(&[1.0], 1.5, 1000, 1e-12, |th: &[f64]| {
        Ok((th[0] * th[0], vec![2.0 * th[0]]))
    });
    assert!(matches!(tr.stop, Err(Error::Divergence { iteration: 10 })));
    assert_eq!(tr.rows.len(), 11);
    let table = fit_table(&tr.rows).to_csv_string().unwrap();
    assert!(table.starts_with("iteration,theta,loss,grad_norm\n"));
    assert_eq!(table.lines().count(), 12);
}

#[test]
fn harmonic_fit_starting_at_the_truth_stops_immediately() {
    let mut c = cfg(Command::Fit, "harmonic");
    c.problem.theta = Some(0.3);
    let tr = run_fit(&c).unwrap();
    assert_eq!(tr.stop.unwrap(), FitStop::Converged);
    assert_eq!(tr.rows.len(), 1);
    assert!(tr.rows[0].loss < 1e-20);
}

#[test]
fn harmonic_fit_with_zero_step_stays_put() {
    let mut c = cfg(Command::Fit, "harmonic");
    c.fit.alpha = 0.0;
    c.fit.iterations = 3;
    let tr = run_fit(&c).unwrap();
    assert_eq!(tr.stop.unwrap(), FitStop::MaxIterations);
    assert!(tr.rows.iter().all(|r| r.theta == vec![0.2]));
    assert!(tr.rows.windows(2).all(|w| w[0].loss == w[1].loss));
}
