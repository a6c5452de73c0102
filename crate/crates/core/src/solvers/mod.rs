//! Explicit Runge-Kutta integration generic over the scalar kind, with
//! scaled-error step control, Hermite dense output, and uniform
//! checkpointing.

mod checkpoint;
mod control;
mod dense;
mod integrate;
mod tableau;

pub use checkpoint::{checkpoint_plan, CheckpointStore};
pub use control::{propose_dt, scaled_error, scaled_error_weighted, Controller, NormMode};
pub use dense::{dense_eval, dense_eval_nodes, hermite};
pub use integrate::{
    fixed_step_count, integrate, rk_step, solve, solve_scalar, FieldSystem, FnSystem, Integrator, IntegratorState,
    Method, RkStep, SaveMode, SolverConfig, System,
};
pub use tableau::ButcherTableau;

#[cfg(test)]
mod tests;
