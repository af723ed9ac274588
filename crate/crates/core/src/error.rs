use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input row; `line` is 1-based.
    #[error("{source_name}: line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("duplicate tweet_id {0:?}")]
    DuplicateTweetId(String),

    #[error("no seeds reachable: none of the seed items is a graph node")]
    NoSeedsReachable,

    #[error("pole {0} has no seed items in the graph")]
    PoleWithoutSeeds(char),

    #[error("no classified edges")]
    NoClassifiedEdges,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures caused by the content of input data rather than
    /// by arguments or the filesystem.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::DuplicateTweetId(_)
                | Error::NoSeedsReachable
                | Error::PoleWithoutSeeds(_)
                | Error::NoClassifiedEdges
        )
    }
}
