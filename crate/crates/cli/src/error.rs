use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

/// One validation problem, located by its dotted key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration:\n{}", join_issues(.0))]
    Invalid(Vec<ConfigIssue>),

    #[error("{context}: {source}")]
    Module {
        context: String,
        source: stable_ddsde::Error,
    },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Other(String),
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    /// 2 for configuration problems, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Parse { .. } | CliError::Invalid(_) => 2,
            _ => 3,
        }
    }

    pub fn issues(&self) -> &[ConfigIssue] {
        match self {
            CliError::Invalid(v) => v,
            _ => &[],
        }
    }
}

/// Attaches a context string to core errors.
pub trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T, CliError>;
}

impl<T> Context<T> for stable_ddsde::Result<T> {
    fn context(self, what: impl Into<String>) -> Result<T, CliError> {
        self.map_err(|source| CliError::Module {
            context: what.into(),
            source,
        })
    }
}
