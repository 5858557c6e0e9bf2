use thiserror::Error;

/// Errors raised across the simulation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("window is empty (left {left} > right {right})")]
    EmptyWindow { left: i64, right: i64 },

    #[error("site {site} lies outside the window and cannot be extended to")]
    OutOfWindow { site: i64 },

    #[error("occupied run touching the edge reaches the window boundary at {site}")]
    BoundaryTruncated { site: i64 },

    #[error("coupling invariant eta <= zeta broken at site {site}")]
    CouplingBroken { site: i64 },

    #[error("initial avalanche state is not dominated by the Bernoulli state at site {site}")]
    DominationViolated { site: i64 },

    #[error("windows of the two configurations differ")]
    WindowMismatch,

    #[error("no vacant site found at or to the right of {site}")]
    NoVacantSite { site: i64 },

    #[error("no occupied site found to the left of {site}")]
    NoOccupiedSite { site: i64 },

    #[error("contour pair has already met")]
    AlreadyStopped,

    #[error("event budget of {budget} exhausted")]
    BudgetExceeded { budget: u64 },

    #[error("site {site} is outside the sampler domain [{left}, {right}]")]
    OutOfDomain { site: i64, left: i64, right: i64 },

    #[error("sampler trace still holds {remaining} box sites")]
    IncompleteTrace { remaining: usize },

    #[error("truncation order must be at least 1")]
    EmptyTruncation,

    #[error("no sign change of the power series on the bracket")]
    BracketFailure,

    #[error("particle density m0 = {m0} is not positive")]
    DegenerateState { m0: f64 },

    #[error("negative concentration {value} at k = {k} after step-size retries")]
    NegativityBreach { k: usize, value: f64 },

    #[error("cannot parse configuration: {0}")]
    Parse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
