use std::path::{Path, PathBuf};

use delaydyn_core::Error as CoreError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn json(path: &Path, source: serde_json::Error) -> Self {
        CliError::Json {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        let line = source.position().map(|p| p.line());
        match line {
            Some(line) => CliError::Parse {
                path: path.to_path_buf(),
                line,
                message: source.to_string(),
            },
            None => CliError::Csv {
                path: path.to_path_buf(),
                source,
            },
        }
    }

    /// 1 for usage errors, 2 for data errors, 3 for numerical or sampler
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Json { .. } | CliError::Csv { .. } => 2,
            CliError::Core(e) => match e.root() {
                CoreError::NumericDomain(_)
                | CoreError::SamplerFailure { .. }
                | CoreError::InsufficientChains(_)
                | CoreError::UndefinedSa => 3,
                _ => 2,
            },
        }
    }
}
