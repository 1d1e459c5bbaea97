use thiserror::Error;

/// Failures that map to a specific process exit code.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("certificate violation: {0}")]
    Certificate(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("step budget exceeded: {0}")]
    Budget(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Certificate(_) => 2,
            Failure::Config(_) => 3,
            Failure::Budget(_) => 4,
        }
    }
}

/// Exit code for an error chain; unclassified errors give 1.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    err.chain()
        .find_map(|e| e.downcast_ref::<Failure>())
        .map_or(1, Failure::exit_code)
}
