use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid functions live on incompatible grids")]
    IncompatibleGrids,

    #[error("invalid time order: t = {t} precedes tau = {tau}")]
    InvalidTimeOrder { t: i64, tau: i64 },

    #[error("closed-form kernel bound out of range for {family} (a = {a}, L = {length}): {value}")]
    BoundOutOfRange {
        family: &'static str,
        a: f64,
        length: f64,
        value: f64,
    },

    #[error("no contraction: certified factor ell = {ell} is not below 1")]
    NoContraction { ell: f64 },

    #[error("iteration budget exceeded: {steps} steps required, limit is {limit}")]
    BudgetExceeded { steps: u64, limit: u64 },

    #[error("divergent input: {0}")]
    DivergentInput(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
