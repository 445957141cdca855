//! Differentiable tile-based splatting.
//!
//! Splats are projected with a first-order (EWA) covariance, sorted front to
//! back by view depth, binned into 16x16 tiles and alpha-composited per
//! pixel. The forward pass produces color, expected depth, normal and
//! accumulated alpha; [`render_backward`] returns exact gradients of any
//! linear functional of those images with respect to every splat parameter.

mod camera;
mod project;
mod reference;
mod render;

use std::path::Path;

pub use camera::{CameraFrame, Intrinsics};
pub use project::{
    project_backward, project_gaussian, projected_covariance, ScreenGaussian, ScreenGrad, Splat,
    SplatGrad,
};
pub use reference::{composite_reference, Contribution, ReferencePixel};
pub use render::{pixel_weight, render, render_backward, RenderContext};

use crate::buffers::{self, ImageBuf};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSettings {
    pub tile_size: usize,
    /// Splats with view depth at or below this are culled (meters).
    pub near: f64,
    /// Cull splats whose centers fall outside this multiple of the frustum.
    pub guard_band: f64,
    /// Added to the diagonal of every screen covariance (px²).
    pub low_pass: f64,
    /// Clamp on the per-pixel effective opacity `α·w`.
    pub max_alpha: f64,
    /// Footprints are truncated at this Mahalanobis radius.
    pub cutoff_sigma: f64,
    pub early_termination: bool,
    pub min_transmittance: f64,
    /// Accumulated alpha below which depth/normal are not normalized.
    pub alpha_eps: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            tile_size: 16,
            near: 0.2,
            guard_band: 1.3,
            low_pass: 0.3,
            max_alpha: 0.99,
            cutoff_sigma: 3.5,
            early_termination: true,
            min_transmittance: 1e-4,
            alpha_eps: 1e-6,
        }
    }
}

/// Rendered images. `depth` is the alpha-normalized expected view depth and
/// `normal` is the renormalized composited camera-space normal. `sky_alpha`
/// is the coverage contributed by sky splats alone; it carries no gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub color: ImageBuf,
    pub depth: ImageBuf,
    pub normal: ImageBuf,
    pub alpha: ImageBuf,
    pub sky_alpha: ImageBuf,
}

impl RenderOutput {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            color: ImageBuf::new(width, height, 3),
            depth: ImageBuf::new(width, height, 1),
            normal: ImageBuf::new(width, height, 3),
            alpha: ImageBuf::new(width, height, 1),
            sky_alpha: ImageBuf::new(width, height, 1),
        }
    }

    pub fn width(&self) -> usize {
        self.color.width
    }

    pub fn height(&self) -> usize {
        self.color.height
    }

    /// Writes `color.png`, `depth.hwsd`, `alpha.hwsd` and `normal.hwsn`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        buffers::write_png_rgb(&dir.join("color.png"), &self.color)?;
        buffers::write_depth(&dir.join("depth.hwsd"), &self.depth)?;
        buffers::write_depth(&dir.join("alpha.hwsd"), &self.alpha)?;
        buffers::write_normals(&dir.join("normal.hwsn"), &self.normal)?;
        Ok(())
    }
}

/// Upstream gradients, one buffer per differentiable output.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderGrads {
    pub color: ImageBuf,
    pub depth: ImageBuf,
    pub normal: ImageBuf,
    pub alpha: ImageBuf,
}

impl RenderGrads {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            color: ImageBuf::new(width, height, 3),
            depth: ImageBuf::new(width, height, 1),
            normal: ImageBuf::new(width, height, 3),
            alpha: ImageBuf::new(width, height, 1),
        }
    }
}
