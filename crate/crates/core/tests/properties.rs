mod common;

use proptest::prelude::*;

use sensikit::adjoints::{adjoint_gradient, gauss_legendre, AdjointConfig, AdjointVariant};
use sensikit::direct::{complexstep_gradient, fd_gradient, forwardad_gradient, FdScheme};
use sensikit::forward::forward_sensitivity;
use sensikit::problems::{catalog, make_harmonic, ProblemId};
use sensikit::scalar::multidual_seed;
use sensikit::solvers::{scaled_error, solve_scalar};
use sensikit::{loss_eval, solve, LossSpec, Method, SaveMode, SolverConfig};

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn lifted_tangents_match_centered_differences((f, x, d) in unary_case()) {
        check_unary(f, x, d)?;
    }

    #[test]
    fn products_follow_the_product_rule(fs in factors()) {
        check_product(&fs)?;
    }

    #[test]
    fn single_direction_multidual_is_a_dual((x, ops) in expression()) {
        check_p1_equivalence(x, &ops)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn observation_gradients_match_differences(
        u in proptest::collection::vec(-5.0..5.0f64, 3),
        target in proptest::collection::vec(-5.0..5.0f64, 3),
        c in proptest::collection::vec(-5.0..5.0f64, 3),
        w in 0.0..3.0f64,
    ) {
        let losses = [
            LossSpec::squared_error(vec![1.0], vec![target], vec![w]),
            LossSpec::PointwiseLinear { times: vec![1.0], coefficients: vec![c] },
        ];
        for loss in &losses {
            let g = loss.observation_grad(0, &u);
            let h = 1e-6;
            for k in 0..3 {
                let (mut up, mut dn) = (u.clone(), u.clone());
                up[k] += h;
                dn[k] -= h;
                let fd = (loss.observation_term(0, &up) - loss.observation_term(0, &dn)) / (2.0 * h);
                let f = loss.observation_term(0, &u);
                prop_assert!((g[k] - fd).abs() <= 1e-8 * (g[k].abs() + f.abs()).max(1.0), "{} vs {}", g[k], fd);
            }
        }
    }

    #[test]
    fn quadrature_orders_agree_on_smooth_integrands(a in 0.1..2.0f64, b in -1.0..1.0f64, len in 0.1..1.0f64) {
        let f = |x: f64| Ok(vec![(a * x).sin() + b * (x * x).cos()]);
        let lo = gauss_legendre(f, 0.0, len, 7).unwrap()[0];
        let hi = gauss_legendre(f, 0.0, len, 15).unwrap()[0];
        prop_assert!((lo - hi).abs() <= 1e-9);
    }

    #[test]
    fn centered_fd_error_is_v_shaped(theta in 0.1..1.0f64) {
        let e = make_harmonic(theta).unwrap();
        let exact = e.reference_gradient.clone().unwrap()[0];
        let f = |th: &[f64]| Ok(e.analytic_loss(th[0]).unwrap());
        let errs: Vec<f64> = (0..29)
            .map(|k| 10f64.powf(-15.0 + 0.5 * k as f64))
            .map(|eps| rel(fd_gradient(f, &[theta], eps, FdScheme::Centered).unwrap()[0], exact))
            .collect();
        let min = errs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(errs[0] >= 100.0 * min && errs[28] >= 100.0 * min, "{:?}", errs);
    }

    #[test]
    fn complex_step_error_never_grows_as_the_step_shrinks(theta in 0.1..1.0f64) {
        let e = make_harmonic(theta).unwrap();
        let exact = e.reference_gradient.clone().unwrap()[0];
        let f = |th: &[sensikit::Complex64]| Ok(e.analytic_loss(th[0]).unwrap());
        let errs: Vec<f64> = (4..=12)
            .map(|k| complexstep_gradient(f, &[theta], 10f64.powi(-k)).unwrap()[0])
            .map(|g| (g - exact).abs())
            .collect();
        // once truncation is gone the error is rounding in the two terms
        // of d/dθ sin(θT)/θ, which can dwarf the gradient itself
        let t1 = e.problem.tspan.1;
        let slack = 8.0 * f64::EPSILON * (t1 / theta + 1.0 / (theta * theta));
        for w in errs.windows(2) {
            prop_assert!(w[1] <= w[0] + slack, "{:?}", errs);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn accepted_steps_have_unit_scaled_error(theta in 0.1..2.0f64, logtol in -11.0..-4.0f64) {
        let e = make_harmonic(theta).unwrap();
        let sol = solve(&e.problem, &SolverConfig::adaptive(10f64.powf(logtol))).unwrap();
        prop_assert!(!sol.step_errors.is_empty());
        prop_assert!(sol.step_errors.iter().all(|&err| err <= 1.0));
    }

    #[test]
    fn solves_are_deterministic(theta in 0.1..2.0f64, logtol in -11.0..-4.0f64) {
        let e = make_harmonic(theta).unwrap();
        let cfg = SolverConfig::adaptive(10f64.powf(logtol));
        prop_assert_eq!(solve(&e.problem, &cfg).unwrap(), solve(&e.problem, &cfg).unwrap());
    }

    #[test]
    fn loss_is_invariant_under_reordering(theta in 0.1..2.0f64, seed in any::<u64>()) {
        let e = make_harmonic(theta).unwrap();
        let sol = solve(&e.problem, &SolverConfig::adaptive(1e-9)).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let targets: Vec<Vec<f64>> = times.iter().map(|t| vec![t.sin(), t.cos()]).collect();
        let weights: Vec<f64> = times.iter().map(|t| 1.0 + t).collect();
        let ordered = LossSpec::squared_error(times.clone(), targets.clone(), weights.clone());
        let mut idx: Vec<usize> = (0..times.len()).collect();
        let mut s = seed;
        for i in (1..idx.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            idx.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = LossSpec::squared_error(
            idx.iter().map(|&i| times[i]).collect(),
            idx.iter().map(|&i| targets[i].clone()).collect(),
            idx.iter().map(|&i| weights[i]).collect(),
        );
        let a = loss_eval(&sol, &ordered, &[theta]).unwrap();
        let b = loss_eval(&sol, &shuffled, &[theta]).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * a.abs());
    }

    #[test]
    fn fixed_grid_sensitivities_equal_ad_tangents(theta in 0.1..1.0f64, k in 1usize..20, rk4 in any::<bool>()) {
        let e = make_harmonic(theta).unwrap();
        let method = if rk4 { Method::Rk4 } else { Method::Euler };
        let cfg = SolverConfig::fixed(method, 0.1 / k as f64);
        let fs = forward_sensitivity(&e.problem, &e.loss, &cfg).unwrap();
        let seeded = multidual_seed(&[theta]).unwrap();
        let ad = solve_scalar(&e.problem, &seeded, &cfg).unwrap();
        let traj = fs.sensitivity_trajectory.unwrap();
        prop_assert_eq!(traj.len(), ad.times.len());
        for ((t, s), (ta, ua)) in traj.iter().zip(ad.times.iter().zip(&ad.states)) {
            prop_assert_eq!(t, ta);
            for i in 0..2 {
                let x = ua[i].tangent(0);
                prop_assert!((s[(i, 0)] - x).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn discrete_adjoint_equals_forward_ad(which in 0usize..3, k in 1usize..8, rk4 in any::<bool>()) {
        let id = ProblemId::ALL[which];
        let e = catalog(id, None, None).unwrap();
        let method = if rk4 { Method::Rk4 } else { Method::Euler };
        // steps that land on every observation time and respect the
        // diffusion limit
        let dt = match id {
            ProblemId::Heat1d => e.default_dt / k as f64,
            _ => 0.1 / k as f64,
        };
        let cfg = SolverConfig::fixed(method, dt);
        let ad = forwardad_gradient(&e.problem, &e.loss, &cfg).unwrap().gradient;
        let da = adjoint_gradient(&e.problem, &e.loss, &AdjointConfig::new(AdjointVariant::Discrete, cfg.clone()))
            .unwrap()
            .gradient;
        let fs = forward_sensitivity(&e.problem, &e.loss, &cfg).unwrap().gradient;
        prop_assert!(rel(da[0], ad[0]) <= 1e-10, "{:?}: {} vs {}", id, da[0], ad[0]);
        prop_assert!(rel(fs[0], ad[0]) <= 1e-10, "{:?}: {} vs {}", id, fs[0], ad[0]);
    }

    #[test]
    fn checkpoint_count_does_not_change_the_gradient(k in 1usize..64, theta in 0.1..0.5f64) {
        let e = make_harmonic(theta).unwrap();
        let cfg = AdjointConfig::new(AdjointVariant::ContinuousInterpolating, SolverConfig::adaptive(1e-10));
        let full = adjoint_gradient(&e.problem, &e.loss, &cfg).unwrap().gradient[0];
        let ck = adjoint_gradient(&e.problem, &e.loss, &cfg.clone().with_checkpoints(k)).unwrap().gradient[0];
        prop_assert!(rel(ck, full) <= 1e-12, "K = {}: {} vs {}", k, ck, full);
    }
}

#[test]
fn joint_norm_changes_the_predprey_step_sequence() {
    let e = catalog(ProblemId::PredPrey, None, None).unwrap();
    let seeded = multidual_seed(&e.problem.params).unwrap();
    let joint = SolverConfig::adaptive(1e-12).with_save(SaveMode::FinalOnly);
    let primal = joint.clone().with_norm(sensikit::NormMode::PrimalOnly);
    let a = solve_scalar(&e.problem, &seeded, &joint).unwrap();
    let b = solve_scalar(&e.problem, &seeded, &primal).unwrap();
    let ta: Vec<f64> = a.nodes.iter().map(|n| n.t).collect();
    let tb: Vec<f64> = b.nodes.iter().map(|n| n.t).collect();
    assert_ne!(ta, tb);
    assert!(ta.len() > tb.len());
    assert_eq!(
        scaled_error(&[1.0], &[1.0], 1e-6, 1e-6, sensikit::NormMode::PrimalOnly),
        0.0
    );
}
