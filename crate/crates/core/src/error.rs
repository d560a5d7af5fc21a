use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot parse rational from {0:?}")]
    ParseRational(String),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("digit set D_N + m D_L with N={n}, m={m}, L={l} is not a direct sum")]
    NotDirect { n: u64, m: u64, l: u64 },

    #[error("d is undefined (infinite): some prime of L={l} does not divide p={p}")]
    InfiniteD { l: u64, p: u64 },

    #[error("parameters (p={p}, N={n}, L={l}, m={m}) do not give a spectral measure")]
    NotSpectral { p: u64, n: u64, l: u64, m: u64 },

    #[error("digit sets have different sizes ({left} vs {right})")]
    CardinalityMismatch { left: usize, right: usize },

    #[error("digit set needs at least two elements")]
    Singleton,

    #[error("enumeration budget exceeded: {needed} words requested, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("internal assertion failed: {0}")]
    Assertion(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
