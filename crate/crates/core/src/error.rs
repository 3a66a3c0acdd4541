use std::path::PathBuf;

use crate::model::{TenantId, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {}", join(.0))]
    Validation(Vec<Violation>),

    #[error("unknown tenant {0}")]
    UnknownTenant(TenantId),

    #[error("tenant {0} does not win under the current bids")]
    NotAWinner(TenantId),

    #[error("{count} bids exceed the exhaustive-search limit of {limit}")]
    TooManyBids { count: usize, limit: usize },

    #[error("dynamic-programming table of {rows} x {columns} cells cannot be allocated")]
    TableTooLarge { rows: usize, columns: u128 },

    #[error("cannot select from an empty candidate list")]
    NoCandidates,

    #[error("tenant {tenant} still wins at bid {bid}, above the allocator's losing bound")]
    PaymentUnbounded { tenant: TenantId, bid: i64 },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
