//! Helpers shared by the property and acceptance suites.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use sensikit::scalar::{dual_lift, UnaryFn};
use sensikit::{Dual, MultiDual, Scalar};

/// Deterministic runner, so acceptance output is reproducible.
pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

pub fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

fn reference(func: UnaryFn, x: f64) -> f64 {
    match func {
        UnaryFn::Sin => x.sin(),
        UnaryFn::Cos => x.cos(),
        UnaryFn::Exp => x.exp(),
        UnaryFn::Log => x.ln(),
        UnaryFn::Pow(e) => x.powf(e),
        UnaryFn::Sqrt => x.sqrt(),
        UnaryFn::Abs => x.abs(),
    }
}

/// A differentiable function with a point inside its domain and an input
/// tangent.
pub fn unary_case() -> impl Strategy<Value = (UnaryFn, f64, f64)> {
    let point = prop_oneof![
        (-10.0..10.0f64).prop_map(|x| (UnaryFn::Sin, x)),
        (-10.0..10.0f64).prop_map(|x| (UnaryFn::Cos, x)),
        (-5.0..5.0f64).prop_map(|x| (UnaryFn::Exp, x)),
        (0.1..10.0f64).prop_map(|x| (UnaryFn::Log, x)),
        (0.1..10.0f64).prop_map(|x| (UnaryFn::Sqrt, x)),
        ((-3.0..3.0f64), (0.1..10.0f64)).prop_map(|(e, x)| (UnaryFn::Pow(e), x)),
        ((0.01..10.0f64), any::<bool>()).prop_map(|(x, neg)| (UnaryFn::Abs, if neg { -x } else { x })),
    ];
    (point, -3.0..3.0f64).prop_map(|((f, x), d)| (f, x, d))
}

/// Tangent against a centered difference at step 1e-7, 1e-6 relative.
///
/// The difference quotient carries rounding error proportional to `|f|`,
/// so the scale is `|d|·(|f′| + |f|)` rather than `|d f′|` alone.
pub fn check_unary(func: UnaryFn, x: f64, d: f64) -> Result<(), TestCaseError> {
    let r = dual_lift(Dual::new(x, d), func).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let h = 1e-7;
    let fd = (reference(func, x + h) - reference(func, x - h)) / (2.0 * h);
    let v = reference(func, x);
    // libm and fused sin/cos may differ in the last place
    prop_assert!(
        (r.value - v).abs() <= 4.0 * f64::EPSILON * v.abs(),
        "{} vs {}",
        r.value,
        v
    );
    let fp = r.tangent / d;
    let scale = d.abs() * (fp.abs() + r.value.abs());
    prop_assert!(
        (r.tangent - d * fd).abs() <= 1e-6 * scale,
        "{:?} at {}: tangent {} vs fd {}",
        func,
        x,
        r.tangent,
        d * fd
    );
    Ok(())
}

pub fn factors() -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((-4.0..4.0f64, -4.0..4.0f64), 2..8)
}

/// The product of `k` duals against `Σᵢ dᵢ Πⱼ≠ᵢ vⱼ`, to rounding.
pub fn check_product(fs: &[(f64, f64)]) -> Result<(), TestCaseError> {
    let prod = fs
        .iter()
        .fold(Dual::constant(1.0), |acc, &(v, d)| acc * Dual::new(v, d));
    let terms: Vec<f64> = (0..fs.len())
        .map(|i| {
            fs.iter()
                .enumerate()
                .map(|(j, &(v, d))| if i == j { d } else { v })
                .product()
        })
        .collect();
    let expected: f64 = terms.iter().sum();
    let bound = 4.0 * fs.len() as f64 * f64::EPSILON * terms.iter().map(|t| t.abs()).sum::<f64>();
    prop_assert!(
        (prod.tangent - expected).abs() <= bound,
        "{} vs {}",
        prod.tangent,
        expected
    );
    prop_assert_eq!(prod.value, fs.iter().map(|f| f.0).product::<f64>());
    Ok(())
}

/// One step of a random expression: how `acc` combines with `c` and `x`.
pub fn expression() -> impl Strategy<Value = (f64, Vec<(u8, f64)>)> {
    (-3.0..3.0f64, proptest::collection::vec((0u8..10, -2.0..2.0f64), 1..24))
}

pub fn eval_expression<T: Scalar>(x: T, ops: &[(u8, f64)]) -> T {
    let one = |v: T| v.clone() * v + 1.0;
    let mut acc = x.clone();
    for &(op, c) in ops {
        acc = match op {
            0 => acc + x.clone() * c,
            1 => acc - c,
            2 => acc * x.clone(),
            3 => acc / one(x.clone()),
            4 => acc.sin(),
            5 => acc.cos() * c,
            6 => acc.sin().exp(),
            7 => one(acc).sqrt(),
            8 => one(acc).ln(),
            _ => acc.powi(2) * 0.25,
        };
    }
    acc
}

/// A one-direction multidual has to be indistinguishable from a dual.
pub fn check_p1_equivalence(x: f64, ops: &[(u8, f64)]) -> Result<(), TestCaseError> {
    let d = eval_expression(Dual::variable(x), ops);
    let m = eval_expression(MultiDual::variable(x, 0, 1), ops);
    prop_assert_eq!(d.value.to_bits(), m.value.to_bits());
    prop_assert_eq!(m.tangents.len(), 1);
    prop_assert_eq!(
        d.tangent.to_bits(),
        m.tangents[0].to_bits(),
        "{} vs {}",
        d.tangent,
        m.tangents[0]
    );
    Ok(())
}

/// The three dual-kernel properties over `cases` inputs each.
pub fn dual_kernel_suite(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&unary_case(), |(f, x, d)| check_unary(f, x, d))
        .map_err(|e| format!("unary: {e}"))?;
    runner(cases)
        .run(&factors(), |fs| check_product(&fs))
        .map_err(|e| format!("product rule: {e}"))?;
    runner(cases)
        .run(&expression(), |(x, ops)| check_p1_equivalence(x, &ops))
        .map_err(|e| format!("p = 1: {e}"))?;
    Ok(())
}
