//! Multi-traversal street-scene reconstruction with hybrid Gaussian
//! splatting: sky and ground Code-Gaussians, scaffold-decoded background,
//! per-traversal appearance latents, plus condition tooling for inserting
//! dynamic objects.

pub mod buffers;
pub mod condition;
pub mod dataset;
pub mod decoders;
pub mod error;
pub mod initializer;
pub mod losses;
pub mod math;
pub mod metrics;
pub mod rasterizer;
pub mod scene;
pub mod toy;
pub mod trainer;

pub use error::{Error, Result};
