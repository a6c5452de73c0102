//! Benchmark harness behind the `sensikit` binary: direct-method sweeps,
//! adjoint comparisons, gradient checks and a gradient-descent fit, each
//! emitting CSV.

mod commands;
mod config;
pub mod csv;
mod methods;

pub use commands::*;
pub use config::{
    log_grid, parse_norm, Command, FitSection, ProblemSection, RunConfig, RunSection, SolverSection, SweepSection,
};
pub use methods::GradientMethod;

#[cfg(test)]
mod tests;
