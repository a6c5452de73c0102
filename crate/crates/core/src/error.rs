use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("arithmetic domain error: {0}")]
    ArithmeticDomain(String),

    #[error("derivative undefined at non-smooth point {at} of {function}")]
    NonSmoothPoint { function: &'static str, at: f64 },

    #[error("non-analytic primitive `{0}` inside a complex-step pipeline")]
    AnalyticityViolation(&'static str),

    #[error("invalid dimension for {what}: expected {expected}, got {got}")]
    InvalidDimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("time {t} outside [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("numerical blow-up at t = {t} (dt = {dt}){hint}")]
    NumericalBlowup { t: f64, dt: f64, hint: String },

    #[error("no convergence: {max_steps} steps exhausted at t = {t}")]
    NonConvergence { max_steps: usize, t: f64 },

    #[error("step size underflow at t = {t} (dt = {dt})")]
    StepsizeUnderflow { t: f64, dt: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("singular parameter: {0}")]
    SingularParameter(String),

    #[error("problem `{0}` has no analytic reference")]
    UnsupportedProblem(String),

    #[error("non-finite loss evaluation at component {component}")]
    NonFiniteLoss { component: usize },

    #[error("gradient descent diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Errors caused by numerics rather than by the caller's inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalBlowup { .. }
                | Error::NonConvergence { .. }
                | Error::StepsizeUnderflow { .. }
                | Error::NonFiniteLoss { .. }
                | Error::Divergence { .. }
                | Error::ArithmeticDomain(_)
                | Error::NonSmoothPoint { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::InvalidDimension { what, expected, got })
    }
}
