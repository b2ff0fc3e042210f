use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("could not parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{context}: {source}")]
    Numeric {
        context: String,
        #[source]
        source: qbm_core::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialisation error: {0}")]
    Serialize(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Parse(_) => 2,
            CliError::Numeric { .. } => 3,
            CliError::Io { .. } | CliError::Serialize(_) => 1,
        }
    }

    pub fn numeric(context: impl Into<String>, source: qbm_core::Error) -> Self {
        CliError::Numeric {
            context: context.into(),
            source,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
