use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A core failure inside one experiment cell.
    #[error("n = {n:e}, replicate {replicate}: {source}")]
    Cell {
        n: f64,
        replicate: u64,
        #[source]
        source: scale_bayes_core::Error,
    },

    #[error(transparent)]
    Numerical(#[from] scale_bayes_core::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } => 1,
            Self::Cell { .. } | Self::Numerical(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
