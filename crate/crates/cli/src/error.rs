//! Error classification and process exit codes.
//!
//! | code | class                                        |
//! |------|----------------------------------------------|
//! | 0    | success                                      |
//! | 1    | I/O or internal failure                      |
//! | 2    | schema or validation violation               |
//! | 3    | numerical failure                            |
//! | 4    | non-convergence with `--require-convergence` |

use popgame_core::Error as CoreError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Io,
    Schema,
    Numerical,
    NonConvergence,
}

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    message: String,
}

impl CliError {
    pub fn io(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Io,
            message: message.into(),
        }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Schema,
            message: message.into(),
        }
    }

    pub fn non_convergence(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::NonConvergence,
            message: message.into(),
        }
    }

    pub fn from_core(err: CoreError) -> Self {
        let class = match err {
            CoreError::NonFiniteField { .. } | CoreError::RateBoundExceeded { .. } => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::Schema,
        };
        Self {
            class,
            message: err.to_string(),
        }
    }

    #[cfg(test)]
    pub fn message(&self) -> &str {
        &self.message
    }

    pub fn exit_code(&self) -> i32 {
        match self.class {
            ErrorClass::Io => 1,
            ErrorClass::Schema => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::NonConvergence => 4,
        }
    }

    /// The machine-readable form printed to stderr on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            error: ErrorClass,
            message: &'a str,
        }
        serde_json::to_string(&Wire {
            error: self.class,
            message: &self.message,
        })
        .expect("error serialization cannot fail")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}
