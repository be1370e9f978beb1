use std::path::PathBuf;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] fractal_calculus::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input, 1 for everything that fails during computation or
    /// output.
    pub fn exit_code(&self) -> u8 {
        use fractal_calculus::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::Domain { .. } | E::InvalidArgument(_) | E::InvalidCurve(_)) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Csv(_) => "csv",
            CliError::Json(_) => "json",
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}
