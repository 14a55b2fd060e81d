use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input (sequences, constraints, matrices).
    #[error("validation error: {0}")]
    Validation(String),

    /// A rational expansion ended before the requested number of digits.
    #[error("expansion terminated after {achieved} digits, {requested} requested")]
    Terminated { achieved: usize, requested: usize },

    /// Shifting a one-digit terminated expansion leaves nothing behind.
    #[error("orbit terminated: no digits left to shift")]
    OrbitTerminated,

    /// Enumeration or sampling work would exceed the configured cap.
    #[error("resource cap exceeded: {work} work units requested, cap is {cap}")]
    ResourceCap { work: u64, cap: u64 },

    #[error("parse error: {0}")]
    Parse(String),
}
