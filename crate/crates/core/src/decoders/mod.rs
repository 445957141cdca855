//! Small MLP decoders with hand-written backpropagation.

mod color;
mod encoding;
mod mlp;
mod scaffold;

pub use color::{ColorBatch, ColorDecoder, ColorGrads};
pub use encoding::{direction_backward, DirEncoding};
pub use mlp::{param_count, Mlp, MlpCache, MlpGrads};
pub use scaffold::{
    AnchorView, DecodedOffset, DecodedOffsetGrad, ScaffoldBatch, ScaffoldDecoder, ScaffoldGrads,
    ScaffoldShape, HEAD_COLOR, HEAD_LOG_SCALE, HEAD_OFFSET, HEAD_OPACITY, HEAD_QUAT, HEAD_WIDTH,
};

pub use crate::scene::embed_traversal;
