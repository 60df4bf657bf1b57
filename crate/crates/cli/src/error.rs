use thiserror::Error;

/// Exit-code carrying error: user/data problems exit 1, bugs exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Shorthand for turning any displayable error into a user error with context.
pub trait UserContext<T> {
    fn user(self, context: impl std::fmt::Display) -> CliResult<T>;
}

impl<T, E: std::fmt::Display> UserContext<T> for Result<T, E> {
    fn user(self, context: impl std::fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::User(format!("{context}: {e}")))
    }
}
