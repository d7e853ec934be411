use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),

    #[error("instance validation failed: {0}")]
    Validation(String),

    #[error("failed to parse instance: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("logic error: {0}")]
    Logic(String),

    #[error(
        "instance too large for exhaustive enumeration: {deployments} deployments \
         (limit {max_deployments}), {users} users (limit {max_users})"
    )]
    TooLarge {
        deployments: u128,
        max_deployments: u128,
        users: usize,
        max_users: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
