use rust_decimal::Decimal;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rate {value} outside {bounds}")]
    InvalidRate { value: Decimal, bounds: &'static str },

    #[error("negative share quantity {0}")]
    NegativeShares(Decimal),

    #[error("arithmetic failure: {0}")]
    Arithmetic(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("firm {0} is in the wrong regime for this operation")]
    WrongRegime(u32),

    #[error("unknown firm {0}")]
    UnknownFirm(u32),

    #[error("unknown holder {0}")]
    UnknownHolder(u32),

    #[error("cannot transfer {requested} shares from a lot holding {available}")]
    Oversell { requested: Decimal, available: Decimal },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code: 2 for bad input, 3 for a broken numeric invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidRate { .. } | Error::InvalidArgument(_) | Error::Config(_) => 2,
            Error::WrongRegime(_) | Error::UnknownFirm(_) | Error::UnknownHolder(_) => 2,
            Error::NegativeShares(_) | Error::Arithmetic(_) | Error::Oversell { .. } | Error::Invariant(_) => 3,
        }
    }
}
