//! Differentiable ODE solving and sensitivity analysis.
//!
//! The crate provides explicit Runge-Kutta solvers generic over the scalar
//! kind, and several ways to compute `dL/dθ` for a loss on the solution:
//!
//! | method | module |
//! |---|---|
//! | forward / centered finite differences, complex step | [`direct`] |
//! | forward-mode AD through the solver | [`direct`] |
//! | continuous forward sensitivities | [`forward`] |
//! | discrete and continuous adjoints | [`adjoints`] |
//!
//! [`problems`] contains the built-in test problems and [`bench`] the
//! benchmark commands behind the `sensikit` binary.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoints;
pub mod bench;
pub mod direct;
pub mod error;
pub mod forward;
pub mod linalg;
pub mod problem;
pub mod problems;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use problem::{
    loss_eval, loss_grad_u, Integrand, LossSpec, OdeProblem, SensitivityResult, Solution, VectorField, WorkStats,
};
pub use scalar::{Complex64, Dual, MultiDual, Scalar};
pub use solvers::{solve, Method, NormMode, SaveMode, SolverConfig};
