use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre_rule(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!(
            "quadrature order must be >= 2, got {order}"
        )));
    }
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

/// `∫ₐᵇ f` by the `order`-point Gauss–Legendre rule, componentwise.
pub fn gauss_legendre<F>(f: F, a: f64, b: f64, order: usize) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    if !(a < b) {
        return Err(Error::InvalidArgument(format!(
            "quadrature interval [{a}, {b}] is empty"
        )));
    }
    let rule = gauss_legendre_rule(order)?;
    integrate_with(&rule, f, a, b)
}

pub(crate) fn integrate_with<F>(rule: &(Vec<f64>, Vec<f64>), mut f: F, a: f64, b: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc: Vec<f64> = Vec::new();
    for (x, w) in rule.0.iter().zip(&rule.1) {
        let v = f(mid + half * x)?;
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, v) in acc.iter_mut().zip(v) {
            *a += half * w * v;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_polynomials_are_exact() {
        let v = gauss_legendre(|x| Ok(vec![x * x, 1.0, x * x * x]), 0.0, 1.0, 2).unwrap();
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((v[1] - 1.0).abs() < 1e-15);
        assert!((v[2] - 0.25).abs() < 1e-16);
    }

    #[test]
    fn sine_over_half_period() {
        // the 7-point rule's truncation error here is 1.79e-12
        let v = gauss_legendre(|x| Ok(vec![x.sin()]), 0.0, PI, 7).unwrap();
        assert!((v[0] - 2.0).abs() < 2e-12);
        let v = gauss_legendre(|x| Ok(vec![x.sin()]), 0.0, PI, 8).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn rules_are_symmetric_and_normalized() {
        for n in 2..=20 {
            let (x, w) = gauss_legendre_rule(n).unwrap();
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n = {n}");
            for i in 0..n {
                assert!((x[i] + x[n - 1 - i]).abs() < 1e-15);
            }
            // exact for degree 2n - 1
            let d = 2 * n - 2;
            let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
            assert!((m - 2.0 / (d as f64 + 1.0)).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn orders_and_intervals_validated() {
        assert!(gauss_legendre(|_| Ok(vec![1.0]), 0.0, 1.0, 1).is_err());
        assert!(gauss_legendre(|_| Ok(vec![1.0]), 1.0, 1.0, 3).is_err());
    }
}
