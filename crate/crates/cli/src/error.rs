use std::path::PathBuf;

use spinrel::{ExtremaError, LiouvilleError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}:{line}: {message}", path.display())]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] spinrel::Error),
}

impl CliError {
    /// 1 for internal invariant breaches, 2 for everything the user can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(spinrel::Error::Liouville(LiouvilleError::InvariantBreach {
                ..
            }))
            | CliError::Model(spinrel::Error::Extrema(
                ExtremaError::MethodDisagreement { .. }
                | ExtremaError::RootMismatch { .. }
                | ExtremaError::UnexpectedRootCount { .. }
                | ExtremaError::BracketNotFound,
            )) => 1,
            _ => 2,
        }
    }
}

macro_rules! lift {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Model(e.into())
            }
        }
    )*};
}

lift!(
    spinrel::ParamError,
    spinrel::LiouvilleError,
    spinrel::ModeError,
    spinrel::ExtremaError,
    spinrel::FptError
);
