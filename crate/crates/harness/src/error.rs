pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] hevcface_core::Error),

    #[error(transparent)]
    Model(#[from] hevcface_cnn::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_file(self, path: &std::path::Path) -> Self {
        Error::File {
            path: path.display().to_string(),
            source: Box::new(self),
        }
    }

    /// The parser error behind this one, if any.
    pub fn parse_error(&self) -> Option<&hevcface_core::Error> {
        match self {
            Error::Parse(e) => Some(e),
            Error::File { source, .. } => source.parse_error(),
            _ => None,
        }
    }
}
