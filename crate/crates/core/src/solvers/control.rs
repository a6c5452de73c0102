//! Scaled error norm and stepsize controller.

use crate::scalar::Scalar;

/// Which coordinates of the local error estimate the controller sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormMode {
    /// Value coordinates only. On dual-number states this ignores the error
    /// in the tangents and can produce grossly wrong derivatives.
    PrimalOnly,
    /// Value and tangent coordinates, `n(p+1)` terms in total.
    #[default]
    JointPrimalDual,
}

/// PI-type controller `η = w₀^{β₁/q} w₁^{β₂/q} w₂^{β₃/q}` where `wᵢ` are
/// inverse scaled errors of the current and two previous steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controller {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub safety: f64,
}

impl Default for Controller {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 0.0,
            beta3: 0.0,
            eta_min: 0.2,
            eta_max: 10.0,
            safety: 0.9,
        }
    }
}

fn term(err: f64, reference: f64, abstol: f64, reltol: f64) -> f64 {
    err / (abstol + reltol * reference)
}

/// Tolerance-weighted RMS of `u − û`.
///
/// Each coordinate is scaled by `abstol + reltol·max(|uᵢ|, |ûᵢ|)`. In
/// [`NormMode::JointPrimalDual`] the tangent coordinates enter the mean
/// with the same weighting; constant entries count as zero tangents.
pub fn scaled_error<T: Scalar>(u: &[T], u_hat: &[T], abstol: f64, reltol: f64, mode: NormMode) -> f64 {
    scaled_error_weighted(u, u_hat, abstol, reltol, mode, 1.0)
}

/// [`scaled_error`] with the tangent coordinates multiplied by
/// `tangent_scale` first, e.g. `1/ε` to turn complex-step imaginary parts
/// into derivatives.
pub fn scaled_error_weighted<T: Scalar>(
    u: &[T],
    u_hat: &[T],
    abstol: f64,
    reltol: f64,
    mode: NormMode,
    tangent_scale: f64,
) -> f64 {
    debug_assert_eq!(u.len(), u_hat.len());
    let n = u.len();
    if n == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (a, b) in u.iter().zip(u_hat) {
        let (x, y) = (a.value(), b.value());
        let e = term(x - y, x.abs().max(y.abs()), abstol, reltol);
        sum += e * e;
    }
    let mut count = n;
    if mode == NormMode::JointPrimalDual {
        let p = u.iter().chain(u_hat).map(|x| x.tangents().len()).max().unwrap_or(0);
        if p > 0 {
            for (a, b) in u.iter().zip(u_hat) {
                let (ta, tb) = (a.tangents(), b.tangents());
                for j in 0..p {
                    let x = tangent_scale * ta.get(j).copied().unwrap_or(0.0);
                    let y = tangent_scale * tb.get(j).copied().unwrap_or(0.0);
                    let e = term(x - y, x.abs().max(y.abs()), abstol, reltol);
                    sum += e * e;
                }
            }
            count = n * (p + 1);
        }
    }
    (sum / count as f64).sqrt()
}

/// Next stepsize `clamp(safety·η, η_min, η_max)·dt_prev`.
///
/// `w` holds the inverse scaled errors of the current and the two previous
/// steps; pass 1 for missing history.
pub fn propose_dt(dt_prev: f64, w: [f64; 3], controller: &Controller, q: u32) -> f64 {
    let q = q as f64;
    let pow = |w: f64, beta: f64| if beta == 0.0 { 1.0 } else { w.powf(beta / q) };
    let eta =
        controller.safety * pow(w[0], controller.beta1) * pow(w[1], controller.beta2) * pow(w[2], controller.beta3);
    let eta = if eta.is_nan() { controller.eta_min } else { eta };
    eta.clamp(controller.eta_min, controller.eta_max) * dt_prev
}

/// Inverse scaled error with a floor so exact steps give a finite `w`.
pub(crate) fn inverse_error(err: f64) -> f64 {
    1.0 / err.max(1e-10)
}
