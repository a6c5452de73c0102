use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sensikit::bench::{self, Command, RunConfig};
use sensikit::Error;

/// Gradient benchmarks for ODE sensitivity methods.
#[derive(Parser)]
#[command(name = "sensikit", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Finite differences, complex step and forward AD over an ε grid.
    SweepDirect(Flags),
    /// Forward sensitivity against the discrete and continuous adjoints.
    CompareAdjoints(Flags),
    /// Every applicable method against centered differences.
    Gradcheck(Flags),
    /// Gradient descent toward synthetic data.
    Fit(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    /// Interior grid points for heat1d.
    #[arg(long)]
    grid: Option<usize>,
    /// Comma-separated gradient methods.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    #[arg(long)]
    eps_min: Option<f64>,
    #[arg(long)]
    eps_max: Option<f64>,
    #[arg(long)]
    eps_count: Option<usize>,
    /// Comma-separated solver tolerances for the sweep's solver mode.
    #[arg(long, value_delimiter = ',')]
    tolerances: Option<Vec<f64>>,
    #[arg(long)]
    abstol: Option<f64>,
    #[arg(long)]
    reltol: Option<f64>,
    /// Time integrator: dp5, rk4 or euler.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Error norm: joint or primal-only.
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    checkpoints: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    gtol: Option<f64>,
    #[arg(long)]
    theta_star: Option<f64>,
    /// Gradient method used by `fit`.
    #[arg(long)]
    fit_method: Option<String>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Flags {
    fn apply(self, c: &mut RunConfig) {
        if self.problem.is_some() {
            c.problem.id = self.problem;
        }
        if self.theta.is_some() {
            c.problem.theta = self.theta;
        }
        if self.grid.is_some() {
            c.problem.grid = self.grid;
        }
        set(&mut c.run.methods, self.method);
        if self.out.is_some() {
            c.run.out = self.out;
        }
        set(&mut c.run.seed, self.seed);
        set(&mut c.sweep.eps_min, self.eps_min);
        set(&mut c.sweep.eps_max, self.eps_max);
        set(&mut c.sweep.eps_count, self.eps_count);
        set(&mut c.sweep.tolerances, self.tolerances);
        set(&mut c.solver.abstol, self.abstol);
        set(&mut c.solver.reltol, self.reltol);
        set(&mut c.solver.method, self.solver);
        if self.dt.is_some() {
            c.solver.dt = self.dt;
        }
        set(&mut c.solver.max_steps, self.max_steps);
        set(&mut c.solver.norm, self.norm);
        if self.checkpoints.is_some() {
            c.solver.checkpoints = self.checkpoints;
        }
        set(&mut c.fit.alpha, self.alpha);
        set(&mut c.fit.iterations, self.iterations);
        set(&mut c.fit.gtol, self.gtol);
        set(&mut c.fit.theta_star, self.theta_star);
        set(&mut c.fit.method, self.fit_method);
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::SweepDirect(f) => (Command::SweepDirect, f),
        Sub::CompareAdjoints(f) => (Command::CompareAdjoints, f),
        Sub::Gradcheck(f) => (Command::Gradcheck, f),
        Sub::Fit(f) => (Command::Fit, f),
    };
    let mut cfg = match flags.config.as_deref().map(RunConfig::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    cfg.run.command = Some(command);
    flags.apply(&mut cfg);

    match bench::run(&cfg) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            // keep stdout pure CSV when the table goes there
            let to_stdout = command == Command::Gradcheck || cfg.run.out.is_some();
            for line in &out.report {
                if to_stdout {
                    println!("{line}");
                } else {
                    eprintln!("{line}");
                }
            }
            if out.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
