use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("segment error in {op}: {msg}")]
    Segment { op: &'static str, msg: String },

    #[error("autodiff: {0}")]
    Autodiff(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: {msg}")]
    Diverged { epoch: usize, msg: String },

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::MissingFile(_)
            | Error::Parse { .. }
            | Error::Graph(_)
            | Error::Checkpoint(_)
            | Error::Eval(_)
            | Error::Io { .. } => 2,
            Error::Shape { .. }
            | Error::Segment { .. }
            | Error::Autodiff(_)
            | Error::Diverged { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
