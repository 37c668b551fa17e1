use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported topology at line {line}: face has {vertices} vertices, only triangles are accepted")]
    UnsupportedTopology { line: usize, vertices: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-manifold edge ({0}, {1}) is shared by {2} faces")]
    NonManifoldEdge(usize, usize, usize),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate face {face}: area {area:e} is below tolerance")]
    DegenerateFace { face: usize, area: f64 },

    #[error("degenerate normal at vertex {0}: incident face normals cancel out")]
    DegenerateNormal(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("label error: {0}")]
    Label(String),

    #[error("tape error: {0}")]
    Tape(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Attaches the file a failure came from.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File { path: path.into(), source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
