use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not a scene file")]
    NotASceneFile,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("unexpected end of file")]
    UnexpectedEof,

    #[error("non-finite parameter in {0}")]
    NonFiniteParameter(&'static str),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("unknown traversal id {0}")]
    UnknownTraversal(u32),

    #[error("empty appearance table")]
    EmptyAppearanceTable,

    #[error("decoder input shape: expected {expected}, got {got}")]
    DecoderInputShape { expected: usize, got: usize },

    #[error("gradient context mismatch")]
    GradientContextMismatch,

    #[error("contributions not depth-sorted")]
    UnsortedContributions,

    #[error("image too small for curvature: {width}x{height}")]
    ImageTooSmall { width: usize, height: usize },

    #[error("image too small for ssim: {width}x{height}")]
    SsimTooSmall { width: usize, height: usize },

    #[error("empty split")]
    EmptySplit,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no valid pixels")]
    NoValidPixels,

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("cannot fit ground plane")]
    GroundPlane,

    #[error("empty point cloud")]
    EmptyPointCloud,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("ply: {0}")]
    Ply(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("duplicate traversal id {0}")]
    DuplicateTraversal(u32),

    #[error("cannot hold out the only traversal")]
    SingleTraversal,

    #[error("box not visible")]
    BoxNotVisible,

    #[error("no valid neighbor frame for index {0}")]
    NoNeighbor(usize),

    #[error("too many unreadable frames: {unreadable} of {total}")]
    TooManyUnreadable { unreadable: usize, total: usize },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
