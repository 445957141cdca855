use log::warn;

use crate::buffers::{self, ImageBuf, Mask};
use crate::dataset::{FrameRecord, TraversalDataset};
use crate::error::{Error, Result};
use crate::losses::normals_from_depth;
use crate::rasterizer::CameraFrame;

/// A frame with its supervision loaded into memory at training resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingFrame {
    pub camera: CameraFrame,
    pub image: ImageBuf,
    /// `false` on dynamic-object pixels.
    pub valid: Mask,
    pub depth: Option<ImageBuf>,
    pub normal: Option<ImageBuf>,
}

impl TrainingFrame {
    /// Frame with every pixel valid and no geometric supervision.
    pub fn from_image(camera: CameraFrame, image: ImageBuf) -> Self {
        let valid = Mask::all_valid(image.width, image.height);
        Self {
            camera,
            image,
            valid,
            depth: None,
            normal: None,
        }
    }

    /// Reads a frame's files and downscales them by `factor`. When no normal
    /// file exists and `normals_from_depth` is set, normals are derived from
    /// the depth map.
    pub fn load(record: &FrameRecord, factor: usize, derive_normals: bool) -> Result<Self> {
        let camera = record.camera.downscaled(factor);
        let image = buffers::read_png_rgb(&record.image)?;
        let k = &record.camera.intrinsics;
        if image.width != k.width || image.height != k.height {
            return Err(Error::ShapeMismatch(format!(
                "{}: image {}x{} but intrinsics say {}x{}",
                record.image.display(),
                image.width,
                image.height,
                k.width,
                k.height
            )));
        }
        let valid = match &record.dyn_mask {
            Some(p) => buffers::read_dynamic_mask(p)?,
            None => Mask::all_valid(image.width, image.height),
        };
        valid.check_dims(image.width, image.height)?;
        let depth = record.depth.as_deref().map(buffers::read_depth).transpose()?;
        let normal = record.normal.as_deref().map(buffers::read_normals).transpose()?;
        for extra in depth.iter().chain(&normal) {
            if extra.width != image.width || extra.height != image.height {
                return Err(Error::ShapeMismatch(format!(
                    "{}: supervision size differs from image",
                    record.image.display()
                )));
            }
        }
        let depth = depth.map(|d| downscale_positive(&d, factor));
        let mut normal = normal.map(|n| n.downscale(factor));
        if normal.is_none() && derive_normals {
            normal = depth.as_ref().map(|d| normals_from_depth(d, &camera.intrinsics));
        }
        Ok(Self {
            camera,
            image: image.downscale(factor),
            valid: valid.downscale(factor),
            depth,
            normal,
        })
    }
}

/// Averages only positive samples so missing depth does not bleed into
/// valid neighbors.
fn downscale_positive(d: &ImageBuf, factor: usize) -> ImageBuf {
    if factor <= 1 {
        return d.clone();
    }
    let w = (d.width / factor).max(1);
    let h = (d.height / factor).max(1);
    let mut out = ImageBuf::new(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let (mut sum, mut n) = (0.0, 0usize);
            for dy in 0..factor {
                for dx in 0..factor {
                    let v = d.at((x * factor + dx).min(d.width - 1), (y * factor + dy).min(d.height - 1), 0);
                    if v > 0.0 && v.is_finite() {
                        sum += v;
                        n += 1;
                    }
                }
            }
            if n == factor * factor {
                *out.at_mut(x, y, 0) = sum / n as f64;
            }
        }
    }
    out
}

/// Loads every frame of a dataset, skipping unreadable ones with a warning.
/// Fails when more than half of the frames cannot be read.
pub fn load_frames(ds: &TraversalDataset, factor: usize, derive_normals: bool) -> Result<Vec<TrainingFrame>> {
    let total = ds.frame_count();
    let mut frames = Vec::with_capacity(total);
    let mut unreadable = 0;
    for record in ds.frames() {
        match TrainingFrame::load(record, factor, derive_normals) {
            Ok(f) => frames.push(f),
            Err(e) => {
                warn!("skipping frame {}: {e}", record.image.display());
                unreadable += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Config("dataset has no frames".into()));
    }
    if 2 * unreadable > total {
        return Err(Error::TooManyUnreadable { unreadable, total });
    }
    Ok(frames)
}
