//! Scalar kinds the solvers are generic over.
//!
//! One integrator implementation serves four arithmetics:
//!
//! - `f64` for plain solves,
//! - [`Complex64`] for complex-step differentiation,
//! - [`Dual`] for a single forward-mode direction,
//! - [`MultiDual`] for `p` simultaneous forward-mode directions.
//!
//! Dual arithmetic truncates the Taylor expansion after the first order,
//! i.e. `ε² = 0` and `εᵢεⱼ = 0`, so tangents are propagated exactly by the
//! product, quotient and chain rules.
//!
//! Comparisons on dual numbers look at the value coordinate only. Adaptive
//! control flow (step acceptance, clamping) therefore runs identically on
//! duals and reals; the price is that derivatives through value-dependent
//! branches are one-sided.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::problem::{DynIntegrand, DynVectorField};

/// Arithmetic contract shared by every scalar kind the solvers accept.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn from_f64(x: f64) -> Self;

    /// Primal (real) coordinate. For complex numbers this is the real part.
    fn value(&self) -> f64;

    /// Derivative coordinates carried alongside the value. Empty for reals;
    /// for complex numbers the imaginary part, which a complex step makes
    /// `ε` times the derivative.
    fn tangents(&self) -> &[f64];

    fn is_finite(&self) -> bool;

    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, e: f64) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    /// Dispatches a type-erased vector field to the implementation for `Self`.
    fn call_field(field: &dyn DynVectorField, t: f64, u: &[Self], p: &[Self], du: &mut [Self]);

    fn call_integrand(h: &dyn DynIntegrand, t: f64, u: &[Self], p: &[Self]) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn value(&self) -> f64 {
        *self
    }
    fn tangents(&self) -> &[f64] {
        &[]
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn powf(&self, e: f64) -> Self {
        f64::powf(*self, e)
    }
    fn call_field(field: &dyn DynVectorField, t: f64, u: &[Self], p: &[Self], du: &mut [Self]) {
        field.eval_f64(t, u, p, du)
    }
    fn call_integrand(h: &dyn DynIntegrand, t: f64, u: &[Self], p: &[Self]) -> Self {
        h.eval_f64(t, u, p)
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn value(&self) -> f64 {
        self.re
    }
    fn tangents(&self) -> &[f64] {
        std::slice::from_ref(&self.im)
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn sin(&self) -> Self {
        Complex64::sin(*self)
    }
    fn cos(&self) -> Self {
        Complex64::cos(*self)
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn ln(&self) -> Self {
        Complex64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        Complex64::sqrt(*self)
    }
    fn powi(&self, n: i32) -> Self {
        Complex64::powi(self, n)
    }
    fn powf(&self, e: f64) -> Self {
        Complex64::powf(*self, e)
    }
    fn call_field(field: &dyn DynVectorField, t: f64, u: &[Self], p: &[Self], du: &mut [Self]) {
        field.eval_complex(t, u, p, du)
    }
    fn call_integrand(h: &dyn DynIntegrand, t: f64, u: &[Self], p: &[Self]) -> Self {
        h.eval_complex(t, u, p)
    }
}

/// `value + ε·tangent` with `ε² = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dual {
    pub value: f64,
    pub tangent: f64,
}

impl Dual {
    pub const fn new(value: f64, tangent: f64) -> Self {
        Self { value, tangent }
    }

    pub const fn constant(value: f64) -> Self {
        Self::new(value, 0.0)
    }

    /// The active variable: tangent 1.
    pub const fn variable(value: f64) -> Self {
        Self::new(value, 1.0)
    }

    fn chain(self, fx: f64, dfx: f64) -> Self {
        Self::new(fx, self.tangent * dfx)
    }

    /// `|x|` with tangent `sign(x)·x'`. At `x = 0` the tangent is taken as 0;
    /// use [`dual_lift`] with [`UnaryFn::Abs`] to get an error instead.
    pub fn abs(self) -> Self {
        if self.value > 0.0 {
            self
        } else if self.value < 0.0 {
            -self
        } else {
            Self::new(0.0, 0.0)
        }
    }
}

impl PartialEq for Dual {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl PartialOrd for Dual {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.tangent + rhs.tangent)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.value - rhs.value, self.tangent - rhs.tangent)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value * rhs.value,
            self.value * rhs.tangent + self.tangent * rhs.value,
        )
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        // same rounding as the multidual quotient
        let inv = 1.0 / rhs.value;
        let q = self.value * inv;
        Dual::new(q, inv * self.tangent + -q * inv * rhs.tangent)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.tangent)
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(self, rhs: f64) -> Dual {
        Dual::new(self.value + rhs, self.tangent)
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    fn sub(self, rhs: f64) -> Dual {
        Dual::new(self.value - rhs, self.tangent)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        Dual::new(self.value * rhs, self.tangent * rhs)
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    fn div(self, rhs: f64) -> Dual {
        Dual::new(self.value / rhs, self.tangent * (1.0 / rhs))
    }
}

impl Scalar for Dual {
    fn from_f64(x: f64) -> Self {
        Dual::constant(x)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn tangents(&self) -> &[f64] {
        std::slice::from_ref(&self.tangent)
    }
    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.tangent.is_finite()
    }
    // sin_cos in both so every dual kind rounds identically
    fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s)
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn ln(&self) -> Self {
        self.chain(self.value.ln(), 1.0 / self.value)
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn powi(&self, n: i32) -> Self {
        self.chain(self.value.powi(n), n as f64 * self.value.powi(n - 1))
    }
    fn powf(&self, e: f64) -> Self {
        self.chain(self.value.powf(e), e * self.value.powf(e - 1.0))
    }
    fn call_field(field: &dyn DynVectorField, t: f64, u: &[Self], p: &[Self], du: &mut [Self]) {
        field.eval_dual(t, u, p, du)
    }
    fn call_integrand(h: &dyn DynIntegrand, t: f64, u: &[Self], p: &[Self]) -> Self {
        h.eval_dual(t, u, p)
    }
}

/// `value + Σᵢ εᵢ·tangents[i]` with `εᵢεⱼ = 0` for all `i, j`.
///
/// An empty tangent vector denotes a constant and combines with any arity.
/// Combining two non-constant values of different arity panics; use
/// [`MultiDual::try_binary`] where the arities are not known to agree.
#[derive(Debug, Clone, Default)]
pub struct MultiDual {
    pub value: f64,
    pub tangents: Vec<f64>,
}

impl MultiDual {
    pub fn new(value: f64, tangents: Vec<f64>) -> Self {
        Self { value, tangents }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value, Vec::new())
    }

    /// Seeds direction `index` out of `arity`.
    pub fn variable(value: f64, index: usize, arity: usize) -> Self {
        let mut tangents = vec![0.0; arity];
        tangents[index] = 1.0;
        Self::new(value, tangents)
    }

    pub fn arity(&self) -> usize {
        self.tangents.len()
    }

    /// Tangent `i`, treating constants as carrying zeros.
    pub fn tangent(&self, i: usize) -> f64 {
        self.tangents.get(i).copied().unwrap_or(0.0)
    }

    /// Binary combination `value = v`, `tangent = da·a' + db·b'` with an
    /// arity check instead of a panic.
    pub fn try_binary(&self, other: &MultiDual, v: f64, da: f64, db: f64) -> Result<MultiDual> {
        let tangents = match (self.arity(), other.arity()) {
            (0, 0) => Vec::new(),
            (_, 0) => self.tangents.iter().map(|a| da * a).collect(),
            (0, _) => other.tangents.iter().map(|b| db * b).collect(),
            (m, k) if m == k => self
                .tangents
                .iter()
                .zip(&other.tangents)
                .map(|(a, b)| da * a + db * b)
                .collect(),
            (m, k) => {
                return Err(Error::InvalidDimension {
                    what: "multidual arity",
                    expected: m,
                    got: k,
                })
            }
        };
        Ok(MultiDual::new(v, tangents))
    }

    fn binary(self, other: MultiDual, v: f64, da: f64, db: f64) -> MultiDual {
        match self.try_binary(&other, v, da, db) {
            Ok(r) => r,
            Err(e) => panic!("{e}"),
        }
    }

    fn chain(mut self, fx: f64, dfx: f64) -> Self {
        self.value = fx;
        self.tangents.iter_mut().for_each(|t| *t *= dfx);
        self
    }

    pub fn abs(self) -> Self {
        if self.value >= 0.0 {
            if self.value == 0.0 {
                let n = self.arity();
                return MultiDual::new(0.0, vec![0.0; n]);
            }
            self
        } else {
            -self
        }
    }
}

impl PartialEq for MultiDual {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl PartialOrd for MultiDual {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl Add for MultiDual {
    type Output = MultiDual;
    fn add(self, rhs: MultiDual) -> MultiDual {
        let v = self.value + rhs.value;
        if self.arity() == rhs.arity() {
            let mut s = self;
            s.value = v;
            s.tangents.iter_mut().zip(&rhs.tangents).for_each(|(a, b)| *a += b);
            return s;
        }
        self.binary(rhs, v, 1.0, 1.0)
    }
}

impl Sub for MultiDual {
    type Output = MultiDual;
    fn sub(self, rhs: MultiDual) -> MultiDual {
        let v = self.value - rhs.value;
        if self.arity() == rhs.arity() {
            let mut s = self;
            s.value = v;
            s.tangents.iter_mut().zip(&rhs.tangents).for_each(|(a, b)| *a -= b);
            return s;
        }
        self.binary(rhs, v, 1.0, -1.0)
    }
}

impl Mul for MultiDual {
    type Output = MultiDual;
    fn mul(self, rhs: MultiDual) -> MultiDual {
        let (a, b) = (self.value, rhs.value);
        self.binary(rhs, a * b, b, a)
    }
}

impl Div for MultiDual {
    type Output = MultiDual;
    fn div(self, rhs: MultiDual) -> MultiDual {
        let inv = 1.0 / rhs.value;
        let q = self.value * inv;
        self.binary(rhs, q, inv, -q * inv)
    }
}

impl Neg for MultiDual {
    type Output = MultiDual;
    fn neg(mut self) -> MultiDual {
        self.value = -self.value;
        self.tangents.iter_mut().for_each(|t| *t = -*t);
        self
    }
}

impl Add<f64> for MultiDual {
    type Output = MultiDual;
    fn add(mut self, rhs: f64) -> MultiDual {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for MultiDual {
    type Output = MultiDual;
    fn sub(mut self, rhs: f64) -> MultiDual {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for MultiDual {
    type Output = MultiDual;
    fn mul(self, rhs: f64) -> MultiDual {
        let v = self.value * rhs;
        self.chain(v, rhs)
    }
}

impl Div<f64> for MultiDual {
    type Output = MultiDual;
    fn div(self, rhs: f64) -> MultiDual {
        let v = self.value / rhs;
        self.chain(v, 1.0 / rhs)
    }
}

impl Scalar for MultiDual {
    fn from_f64(x: f64) -> Self {
        MultiDual::constant(x)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn tangents(&self) -> &[f64] {
        &self.tangents
    }
    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.tangents.iter().all(|t| t.is_finite())
    }
    fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.clone().chain(s, c)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.clone().chain(c, -s)
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.clone().chain(e, e)
    }
    fn ln(&self) -> Self {
        self.clone().chain(self.value.ln(), 1.0 / self.value)
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.clone().chain(s, 0.5 / s)
    }
    fn powi(&self, n: i32) -> Self {
        self.clone()
            .chain(self.value.powi(n), n as f64 * self.value.powi(n - 1))
    }
    fn powf(&self, e: f64) -> Self {
        self.clone().chain(self.value.powf(e), e * self.value.powf(e - 1.0))
    }
    fn call_field(field: &dyn DynVectorField, t: f64, u: &[Self], p: &[Self], du: &mut [Self]) {
        field.eval_multidual(t, u, p, du)
    }
    fn call_integrand(h: &dyn DynIntegrand, t: f64, u: &[Self], p: &[Self]) -> Self {
        h.eval_multidual(t, u, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnaryFn {
    Sin,
    Cos,
    Exp,
    Log,
    Pow(f64),
    Sqrt,
    Abs,
}

/// Checked dual arithmetic: division by a zero value is an error rather
/// than an infinity.
pub fn dual_arith(a: Dual, b: Dual, op: BinaryOp) -> Result<Dual> {
    Ok(match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b.value == 0.0 {
                return Err(Error::ArithmeticDomain("division by dual with zero value".into()));
            }
            a / b
        }
    })
}

/// Lifts `func` to dual numbers, rejecting points where it is undefined or
/// not differentiable.
pub fn dual_lift(a: Dual, func: UnaryFn) -> Result<Dual> {
    let x = a.value;
    match func {
        UnaryFn::Sin => Ok(a.sin()),
        UnaryFn::Cos => Ok(a.cos()),
        UnaryFn::Exp => Ok(a.exp()),
        UnaryFn::Log => {
            if x > 0.0 {
                Ok(a.ln())
            } else {
                Err(Error::ArithmeticDomain(format!("log of non-positive value {x}")))
            }
        }
        UnaryFn::Sqrt => {
            if x > 0.0 {
                Ok(a.sqrt())
            } else if x == 0.0 {
                Err(Error::NonSmoothPoint {
                    function: "sqrt",
                    at: x,
                })
            } else {
                Err(Error::ArithmeticDomain(format!("sqrt of negative value {x}")))
            }
        }
        UnaryFn::Pow(e) => {
            let integral = e.fract() == 0.0;
            if x > 0.0 || (integral && (x != 0.0 || e >= 1.0)) {
                Ok(a.powf(e))
            } else {
                Err(Error::ArithmeticDomain(format!("pow({x}, {e}) not differentiable")))
            }
        }
        UnaryFn::Abs => {
            if x == 0.0 {
                Err(Error::NonSmoothPoint { function: "abs", at: x })
            } else {
                Ok(a.abs())
            }
        }
    }
}

/// Seeds `θ` as `p` multidual numbers whose tangents are the canonical basis.
pub fn multidual_seed(theta: &[f64]) -> Result<Vec<MultiDual>> {
    if theta.is_empty() {
        return Err(Error::InvalidDimension {
            what: "parameter vector",
            expected: 1,
            got: 0,
        });
    }
    let p = theta.len();
    Ok(theta
        .iter()
        .enumerate()
        .map(|(i, &v)| MultiDual::variable(v, i, p))
        .collect())
}

/// Complex `abs` is not analytic, so complex-step pipelines must not use it.
pub fn complex_abs_checked(_z: Complex64) -> Result<Complex64> {
    Err(Error::AnalyticityViolation("abs"))
}
