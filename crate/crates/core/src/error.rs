use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid rate `{field}`: {reason}")]
    InvalidRate { field: &'static str, reason: String },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("domain error at n = {index}: {reason}")]
    Domain { index: usize, reason: String },

    #[error("index {index} out of range (valid: {lo}..={hi})")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },

    #[error(
        "deviation sweep did not converge: buffer {buffer} exceeds cap {cap} (last disagreement {disagreement:e})"
    )]
    Convergence {
        buffer: usize,
        cap: usize,
        disagreement: f64,
    },

    #[error("truncation failure: {0}")]
    Truncation(String),

    #[error("deviation table too short: need d up to n = {needed}, have {have}")]
    InsufficientLength { needed: usize, have: usize },

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
