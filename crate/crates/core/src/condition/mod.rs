//! Condition bundles for an external dynamic-object generator, and the
//! frame triplets used to train it.

mod boxes;

pub use boxes::{project_box, rasterize_box_mask_depth, Box3d, InstanceMaps, ProjectedBox};

use std::path::{Path, PathBuf};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::buffers::{self, ImageBuf, Mask};
use crate::error::{Error, Result};
use crate::rasterizer::{render, CameraFrame, RenderSettings};
use crate::scene::{decode_view, Scene};
use crate::trainer::{fit_appearance_latent, FitConfig};

/// Fill value for masked pixels in stage-1 targets.
pub const MASK_FILL: f64 = 0.5;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.05;
/// Maximum frame offset between source and ground-truth frames.
pub const NEIGHBOR_RADIUS: usize = 5;

/// The source frame a bundle is built from.
#[derive(Debug, Clone)]
pub struct SourceFrame<'a> {
    pub image: &'a ImageBuf,
    pub image_path: Option<PathBuf>,
    /// Static-pixel mask from the dataset (`false` = dynamic); `None` = all valid.
    pub valid: Option<&'a Mask>,
    pub boxes: &'a [Box3d],
    pub camera: &'a CameraFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionBundle {
    /// Static-scene render at the target view under the fitted latent.
    pub background: ImageBuf,
    pub source_image: Option<PathBuf>,
    /// Instance ids of the boxes under the source camera.
    pub mask_src: InstanceMaps,
    /// Instance ids and box-surface depth under the target camera.
    pub mask_tgt: InstanceMaps,
    pub boxes: Vec<ProjectedBox>,
    pub latent: Vec<f32>,
    pub source_camera: CameraFrame,
    pub target_camera: CameraFrame,
}

/// Fits a latent to the source image (boxes masked out), renders the static
/// scene from `target`, and projects the boxes into both views.
pub fn build_bundle(
    scene: &Scene,
    src: &SourceFrame<'_>,
    target: &CameraFrame,
    fit: &FitConfig,
    settings: &RenderSettings,
) -> Result<ConditionBundle> {
    src.camera.validate()?;
    target.validate()?;
    for b in src.boxes {
        b.validate()?;
    }
    let mask_src = rasterize_box_mask_depth(src.boxes, src.camera);
    let mut valid = match src.valid {
        Some(m) => m.clone(),
        None => Mask::all_valid(src.image.width, src.image.height),
    };
    valid.check_dims(mask_src.width, mask_src.height)?;
    for (v, id) in valid.data.iter_mut().zip(&mask_src.ids) {
        *v &= *id == 0;
    }
    let latent = fit_appearance_latent(scene, src.image, &valid, src.camera, fit, settings)?;
    let view = decode_view(scene, target, &latent)?;
    let (out, _) = render(&view.splats, target, settings);

    let mask_tgt = rasterize_box_mask_depth(src.boxes, target);
    let mut boxes = Vec::with_capacity(src.boxes.len());
    for (i, b) in src.boxes.iter().enumerate() {
        match project_box(b, target, settings.near) {
            Ok(p) => boxes.push(p),
            Err(Error::BoxNotVisible) => info!("box {i} (track {}) not visible from target view, skipped", b.track_id),
            Err(e) => return Err(e),
        }
    }
    Ok(ConditionBundle {
        background: out.color,
        source_image: src.image_path.clone(),
        mask_src,
        mask_tgt,
        boxes,
        latent,
        source_camera: src.camera.clone(),
        target_camera: target.clone(),
    })
}

fn camera_json(c: &CameraFrame) -> serde_json::Value {
    let k = &c.intrinsics;
    json!({
        "rotation_wxyz": c.rotation,
        "center": [c.translation.x, c.translation.y, c.translation.z],
        "intrinsics": {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy, "w": k.width, "h": k.height},
        "traversal": c.traversal,
        "timestamp": c.timestamp,
    })
}

/// Writes `bg.png`, `mask_src.png`, `mask_tgt.png`, `depth.hwsd`,
/// `boxes.json` and `meta.json` into `dir`.
pub fn export_bundle(bundle: &ConditionBundle, dir: &Path, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    buffers::write_png_rgb(&dir.join("bg.png"), &bundle.background)?;
    let m = &bundle.mask_src;
    buffers::write_png_gray16(&dir.join("mask_src.png"), m.width, m.height, &m.ids)?;
    let m = &bundle.mask_tgt;
    buffers::write_png_gray16(&dir.join("mask_tgt.png"), m.width, m.height, &m.ids)?;
    buffers::write_depth(&dir.join("depth.hwsd"), &m.depth)?;
    let path = dir.join("boxes.json");
    let text = serde_json::to_string_pretty(&bundle.boxes)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let meta = json!({
        "source_camera": camera_json(&bundle.source_camera),
        "target_camera": camera_json(&bundle.target_camera),
        "source_image": bundle.source_image.as_ref().map(|p| p.display().to_string()),
        "traversal": bundle.source_camera.traversal,
        "latent": bundle.latent,
        "seed": seed,
    });
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Which image plays the role of the generator's target input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    /// Ground-truth frame with boxes grayed out plus noise.
    MaskedNoisy,
    /// Static-scene render at the ground-truth camera.
    StaticRender,
}

/// Frame indices within one traversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameTriplet {
    pub traversal: u32,
    pub src: usize,
    /// The target image is derived from this frame's camera / image.
    pub tgt: usize,
    pub gt: usize,
    pub target: TargetKind,
}

/// Draws a source frame uniformly from the up-to-ten neighbors of `gt`.
pub fn sample_triplet(
    traversal: u32,
    len: usize,
    gt: usize,
    target: TargetKind,
    rng: &mut impl Rng,
) -> Result<FrameTriplet> {
    if gt >= len {
        return Err(Error::Config(format!("frame index {gt} out of range for {len} frames")));
    }
    let lo = gt.saturating_sub(NEIGHBOR_RADIUS);
    let hi = (gt + NEIGHBOR_RADIUS).min(len - 1);
    let candidates: Vec<usize> = (lo..=hi).filter(|i| *i != gt).collect();
    if candidates.is_empty() {
        return Err(Error::NoNeighbor(gt));
    }
    let src = candidates[rng.random_range(0..candidates.len())];
    Ok(FrameTriplet {
        traversal,
        src,
        tgt: gt,
        gt,
        target,
    })
}

/// Grays out every pixel covered by a box, then adds seeded i.i.d.
/// `N(0, sigma^2)` noise to the whole image and clamps to `[0, 1]`.
pub fn stage1_target(gt: &ImageBuf, boxes: &[Box3d], cam: &CameraFrame, sigma: f64, seed: u64) -> Result<ImageBuf> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Config("noise sigma must be >= 0".into()));
    }
    let maps = rasterize_box_mask_depth(boxes, cam);
    if maps.width != gt.width || maps.height != gt.height {
        return Err(Error::ShapeMismatch("image size differs from camera intrinsics".into()));
    }
    let c = gt.channels;
    let mut out = gt.clone();
    for (i, id) in maps.ids.iter().enumerate() {
        if *id != 0 {
            out.data[i * c..(i + 1) * c].fill(MASK_FILL);
        }
    }
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut out.data {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Stage-2 target: the static scene rendered at the ground-truth camera.
pub fn stage2_target(scene: &Scene, cam: &CameraFrame, latent: &[f32], settings: &RenderSettings) -> Result<ImageBuf> {
    let view = decode_view(scene, cam, latent)?;
    Ok(render(&view.splats, cam, settings).0.color)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::rasterizer::Intrinsics;

    fn cam() -> CameraFrame {
        CameraFrame::new(
            Intrinsics {
                fx: 20.0,
                fy: 20.0,
                cx: 15.5,
                cy: 15.5,
                width: 32,
                height: 32,
            },
            [1.0, 0.0, 0.0, 0.0],
            Vec3::zeros(),
        )
    }

    fn cube() -> Box3d {
        Box3d {
            center: [0.0, 0.0, 5.0],
            size: [1.0, 1.0, 1.0],
            yaw: 0.0,
            category: "car".into(),
            track_id: 1,
        }
    }

    #[test]
    fn triplet_boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let t = sample_triplet(0, 20, 0, TargetKind::MaskedNoisy, &mut rng).unwrap();
            assert!((1..=5).contains(&t.src));
            let t = sample_triplet(0, 20, 19, TargetKind::MaskedNoisy, &mut rng).unwrap();
            assert!((14..=18).contains(&t.src));
        }
        assert!(matches!(
            sample_triplet(0, 1, 0, TargetKind::MaskedNoisy, &mut rng),
            Err(Error::NoNeighbor(0))
        ));
    }

    #[test]
    fn stage1_without_noise() {
        let img = ImageBuf::filled(32, 32, 3, 0.2);
        assert_eq!(stage1_target(&img, &[], &cam(), 0.0, 1).unwrap(), img);
        let out = stage1_target(&img, &[cube()], &cam(), 0.0, 1).unwrap();
        let maps = rasterize_box_mask_depth(&[cube()], &cam());
        for y in 0..32 {
            for x in 0..32 {
                let want = if maps.id(x, y) != 0 { MASK_FILL } else { 0.2 };
                assert_eq!(out.pixel(x, y), &[want; 3]);
            }
        }
        assert!(stage1_target(&img, &[], &cam(), -1.0, 1).is_err());
    }

    #[test]
    fn export_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let maps = rasterize_box_mask_depth(&[cube()], &cam());
        let bundle = ConditionBundle {
            background: ImageBuf::filled(32, 32, 3, 0.5),
            source_image: None,
            mask_src: maps.clone(),
            mask_tgt: maps,
            boxes: vec![project_box(&cube(), &cam(), 0.2).unwrap()],
            latent: vec![0.0; 4],
            source_camera: cam(),
            target_camera: cam(),
        };
        export_bundle(&bundle, dir.path(), 3).unwrap();
        for f in ["bg.png", "mask_src.png", "mask_tgt.png", "depth.hwsd", "boxes.json", "meta.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let (w, h, ids) = buffers::read_png_gray16(&dir.path().join("mask_tgt.png")).unwrap();
        assert_eq!((w, h), (32, 32));
        assert_eq!(ids, bundle.mask_tgt.ids);
        let d = buffers::read_depth(&dir.path().join("depth.hwsd")).unwrap();
        assert_eq!(d, bundle.mask_tgt.depth);
    }
}
