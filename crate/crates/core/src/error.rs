use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An enumeration would exceed its configured size cap.
    #[error("enumeration of {requested} items exceeds the cap of {cap}")]
    CapExceeded { requested: u128, cap: u128 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The observed data cannot be reproduced by any feasible point of the program.
    #[error("observed data are inconsistent with the program constraints: {0}")]
    InfeasibleData(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_cap(requested: u128, cap: u128) -> Result<()> {
    if requested > cap {
        Err(Error::CapExceeded { requested, cap })
    } else {
        Ok(())
    }
}

/// `base^exp` without overflow, saturating at `u128::MAX`.
pub(crate) fn checked_pow(base: usize, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}
