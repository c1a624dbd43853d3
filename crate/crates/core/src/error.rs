use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("velocity {v} is not above the floor {floor}")]
    VelocityTooLow { v: f64, floor: f64 },

    #[error("impact solve did not converge (last residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("two preimages found in the search bracket, at t = {first} and t = {second}")]
    AmbiguousPreimage { first: f64, second: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("no interior minimum in [{lo}, {hi}]")]
    NoInteriorMinimum { lo: f64, hi: f64 },

    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: f64 },

    #[error("cycle matrix is not hyperbolic (trace = {trace})")]
    NotHyperbolic { trace: f64 },

    #[error("successive approximation diverged at sweep {sweep} (update {update:e})")]
    DivergenceDetected { sweep: usize, update: f64 },

    #[error("tail term {tail:e} at the truncation horizon exceeds the bound")]
    TailTruncationTooCoarse { tail: f64 },

    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, index: usize) -> Self {
        Error::Step {
            index,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping step-index wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }

    /// True if the error comes from a numerical solve rather than bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::VelocityTooLow { .. }
                | Error::NoConvergence { .. }
                | Error::AmbiguousPreimage { .. }
                | Error::DivergenceDetected { .. }
                | Error::TailTruncationTooCoarse { .. }
        )
    }
}
