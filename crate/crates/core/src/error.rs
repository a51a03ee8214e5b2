use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("scene generation failed: {0}")]
    GenerationFailure(String),
    #[error("scene has no navigable viewpoints")]
    SceneUnnavigable,
    #[error("no candidate viewpoints left")]
    ExplorationExhausted,
    #[error("no frontier cells left")]
    ExplorationComplete,
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("{path}:{line}:{column}: {message}\n    {context}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
        context: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Wraps a serde_json error with the offending line of `text`.
    pub fn parse(path: impl AsRef<std::path::Path>, text: &str, err: serde_json::Error) -> Self {
        let line = err.line();
        let context = text
            .lines()
            .nth(line.saturating_sub(1))
            .unwrap_or("")
            .trim_end()
            .to_string();
        Error::Parse {
            path: path.as_ref().display().to_string(),
            line,
            column: err.column(),
            message: err.to_string(),
            context,
        }
    }
}
