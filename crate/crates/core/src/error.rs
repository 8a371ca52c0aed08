use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("failure curve truncated at delta_cap = {delta_cap} with P_F = {last_pf:e} >= epsilon_tail")]
    TruncatedCurve { delta_cap: usize, last_pf: f64 },
    #[error("instance too large to enumerate: {0}")]
    TooLarge(String),
    #[error("budget violated: placement stores {stored} symbols, budget is {budget}")]
    BudgetViolated { stored: u64, budget: u64 },
    #[error("runaway delivery: request {request_index} needed more than {limit} backhaul symbols")]
    Runaway { request_index: u64, limit: u64 },
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
