//! Small synthetic street scene with known ground truth: a flat road with
//! verges, ~50 colored blobs beside it, a sky dome, and several traversals
//! that see the same geometry under different global color transforms.
//!
//! Ground-truth images are rendered with the crate's own rasterizer from
//! explicit colored splats, so a perfect reconstruction is representable.
//! Frames carry pseudo ground-truth depth but no normal maps: the blobs are
//! isotropic and have no well-defined surface orientation.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::buffers::{self, ImageBuf, Mask};
use crate::condition::{rasterize_box_mask_depth, Box3d};
use crate::dataset::{save_manifest, Condition, FrameRecord, Traversal, TraversalDataset};
use crate::error::{Error, Result};
use crate::initializer::{write_ply, PointCloud};
use crate::math::Vec3;
use crate::rasterizer::{render, CameraFrame, Intrinsics, RenderSettings, Splat};
use crate::trainer::TrainingFrame;

/// Per-channel `gain * c + bias`, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorTransform {
    pub gain: [f64; 3],
    pub bias: [f64; 3],
}

impl ColorTransform {
    pub const IDENTITY: Self = Self {
        gain: [1.0; 3],
        bias: [0.0; 3],
    };

    pub fn apply(&self, c: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| (self.gain[i] * c[i] + self.bias[i]).clamp(0.0, 1.0))
    }

    /// Componentwise blend, `t = 0` gives `self`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        Self {
            gain: [0, 1, 2].map(|i| self.gain[i] + t * (other.gain[i] - self.gain[i])),
            bias: [0, 1, 2].map(|i| self.bias[i] + t * (other.bias[i] - self.bias[i])),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub frames_per_traversal: usize,
    pub blobs: usize,
    /// Color transforms of the training traversals (ids 1, 2, ...).
    pub train_transforms: Vec<ColorTransform>,
    /// Transform of an extra held-out traversal, driven in a shifted lane.
    pub held_out: Option<ColorTransform>,
    /// Paint a vehicle box into every frame and mark it dynamic.
    pub vehicles: bool,
}

impl Default for ToyConfig {
    fn default() -> Self {
        let dusk = ColorTransform {
            gain: [0.65, 0.7, 0.85],
            bias: [0.0, 0.02, 0.08],
        };
        Self {
            seed: 0,
            width: 64,
            height: 64,
            focal: 40.0,
            frames_per_traversal: 8,
            blobs: 50,
            train_transforms: vec![ColorTransform::IDENTITY, dusk],
            held_out: Some(ColorTransform::IDENTITY.lerp(&dusk, 0.5)),
            vehicles: true,
        }
    }
}

/// Ground extent in x and y (meters).
pub const GROUND_X: [f64; 2] = [-10.0, 10.0];
pub const GROUND_Y: [f64; 2] = [-5.0, 45.0];
const GROUND_SPACING: f64 = 0.5;
const CAMERA_HEIGHT: f64 = 1.5;
const FRAME_STEP: f64 = 1.0;
const SKY_RADIUS: f64 = 400.0;
const SKY_COUNT: usize = 400;
const VEHICLE_COLOR: [f64; 3] = [0.8, 0.1, 0.1];
/// Pixels with more sky coverage than this get no depth target.
const SKY_DEPTH_CUTOFF: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyFrame {
    pub camera: CameraFrame,
    pub image: ImageBuf,
    /// `false` on vehicle pixels.
    pub valid: Mask,
    /// View-space depth of the static scene, 0 wherever sky shows through.
    pub depth: ImageBuf,
    pub boxes: Vec<Box3d>,
}

impl ToyFrame {
    pub fn training_frame(&self) -> TrainingFrame {
        TrainingFrame {
            camera: self.camera.clone(),
            image: self.image.clone(),
            valid: self.valid.clone(),
            depth: Some(self.depth.clone()),
            normal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTraversal {
    pub id: u32,
    pub condition: Condition,
    pub transform: ColorTransform,
    pub held_out: bool,
    pub frames: Vec<ToyFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyWorld {
    pub config: ToyConfig,
    /// Ground-truth splats under the identity transform.
    pub splats: Vec<Splat>,
    /// Ground samples plus one point per blob center.
    pub cloud: PointCloud,
    pub traversals: Vec<ToyTraversal>,
}

fn ground_color(x: f64, y: f64) -> [f64; 3] {
    let ax = x.abs();
    let wobble = 0.04 * (y / 3.0).sin();
    if ax < 2.5 {
        [0.35 + wobble, 0.35 + wobble, 0.37 + wobble]
    } else if ax < 3.2 {
        [0.62, 0.6, 0.56]
    } else {
        [0.25 + wobble, 0.5 + 0.5 * wobble, 0.2]
    }
}

fn sky_color(elevation: f64) -> [f64; 3] {
    let t = elevation.clamp(0.0, 1.0);
    let lo = [0.62, 0.74, 0.95];
    let hi = [0.25, 0.45, 0.85];
    [0, 1, 2].map(|i| lo[i] + t * (hi[i] - lo[i]))
}

fn intrinsics(cfg: &ToyConfig) -> Intrinsics {
    Intrinsics {
        fx: cfg.focal,
        fy: cfg.focal,
        cx: 0.5 * (cfg.width as f64 - 1.0),
        cy: 0.5 * (cfg.height as f64 - 1.0),
        width: cfg.width,
        height: cfg.height,
    }
}

fn camera(cfg: &ToyConfig, lane: f64, k: usize, traversal: u32) -> CameraFrame {
    let eye = Vec3::new(lane, k as f64 * FRAME_STEP + 0.5 * lane, CAMERA_HEIGHT);
    let target = eye + Vec3::new(0.0, 10.0, -2.7);
    CameraFrame::looking_at(intrinsics(cfg), eye, target, Vec3::z()).with_traversal(traversal, 0.5 * k as f64)
}

fn vehicle(eye: &Vec3, k: usize) -> Box3d {
    Box3d {
        center: [-1.2, eye.y + 7.0 + 0.3 * k as f64, 0.75],
        size: [4.0, 1.8, 1.5],
        yaw: FRAC_PI_2,
        category: "car".into(),
        track_id: 1,
    }
}

impl ToyWorld {
    pub fn generate(cfg: &ToyConfig) -> Result<Self> {
        if cfg.train_transforms.is_empty() || cfg.frames_per_traversal == 0 || cfg.width == 0 || cfg.height == 0 {
            return Err(Error::Config("toy scene needs traversals, frames and a non-empty image".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut splats = Vec::new();

        // sky dome, area-uniform above the horizon
        let dome_center = Vec3::new(0.0, 0.5 * (GROUND_Y[0] + GROUND_Y[1]), 0.0);
        let spacing = (TAU * SKY_RADIUS * SKY_RADIUS / SKY_COUNT as f64).sqrt();
        for _ in 0..SKY_COUNT {
            let u: f64 = rng.random_range(-0.05..1.0);
            let phi = rng.random::<f64>() * TAU;
            let s = (1.0 - u * u).sqrt();
            let p = dome_center + SKY_RADIUS * Vec3::new(s * phi.cos(), s * phi.sin(), u);
            let mut sp = Splat::isotropic(p, spacing, 0.99, sky_color(u));
            sp.sky = true;
            splats.push(sp);
        }

        let nx = ((GROUND_X[1] - GROUND_X[0]) / GROUND_SPACING).round() as usize;
        let ny = ((GROUND_Y[1] - GROUND_Y[0]) / GROUND_SPACING).round() as usize;
        for j in 0..=ny {
            for i in 0..=nx {
                let x = GROUND_X[0] + i as f64 * GROUND_SPACING;
                let y = GROUND_Y[0] + j as f64 * GROUND_SPACING;
                splats.push(Splat {
                    position: Vec3::new(x, y, 0.0),
                    rotation: crate::math::IDENTITY_QUAT,
                    scale: Vec3::new(0.5, 0.5, 0.02),
                    opacity: 0.99,
                    color: ground_color(x, y),
                    sky: false,
                });
            }
        }

        let mut points = Vec::new();
        for _ in 0..300 {
            let x = rng.random_range(GROUND_X[0]..=GROUND_X[1]);
            let y = rng.random_range(GROUND_Y[0]..=GROUND_Y[1]);
            points.push([x, y, rng.random_range(-0.01..=0.01)]);
        }
        for _ in 0..cfg.blobs {
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let p = [
                side * rng.random_range(3.8..9.0),
                rng.random_range(2.0..40.0),
                rng.random_range(0.6..3.0),
            ];
            let color = [0, 1, 2].map(|_| rng.random_range(0.1..0.9));
            splats.push(Splat::isotropic(Vec3::from(p), rng.random_range(0.3..0.6), 0.95, color));
            points.push(p);
        }

        let mut traversals = Vec::new();
        let mut plan: Vec<(ColorTransform, bool)> = cfg.train_transforms.iter().map(|t| (*t, false)).collect();
        if let Some(t) = cfg.held_out {
            plan.push((t, true));
        }
        let settings = RenderSettings::default();
        for (n, (transform, held_out)) in plan.into_iter().enumerate() {
            let id = n as u32 + 1;
            let lane = if held_out { 0.5 } else { 0.0 };
            let tinted: Vec<Splat> = splats
                .iter()
                .map(|s| Splat {
                    color: transform.apply(s.color),
                    ..s.clone()
                })
                .collect();
            let mut frames = Vec::with_capacity(cfg.frames_per_traversal);
            for k in 0..cfg.frames_per_traversal {
                let cam = camera(cfg, lane, k, id);
                let (out, _) = render(&tinted, &cam, &settings);
                let mut image = out.color;
                let mut depth = out.depth;
                for (d, s) in depth.data.iter_mut().zip(&out.sky_alpha.data) {
                    if *s > SKY_DEPTH_CUTOFF {
                        *d = 0.0;
                    }
                }
                let mut valid = Mask::all_valid(cfg.width, cfg.height);
                let boxes = if cfg.vehicles {
                    let b = vehicle(&cam.translation, k);
                    let maps = rasterize_box_mask_depth(std::slice::from_ref(&b), &cam);
                    for (i, id) in maps.ids.iter().enumerate() {
                        if *id != 0 {
                            image.data[3 * i..3 * i + 3].copy_from_slice(&transform.apply(VEHICLE_COLOR));
                            valid.data[i] = false;
                        }
                    }
                    vec![b]
                } else {
                    Vec::new()
                };
                frames.push(ToyFrame {
                    camera: cam,
                    image,
                    valid,
                    depth,
                    boxes,
                });
            }
            traversals.push(ToyTraversal {
                id,
                condition: if n == 0 { Condition::Day } else { Condition::Night },
                transform,
                held_out,
                frames,
            });
        }
        Ok(Self {
            config: cfg.clone(),
            splats,
            cloud: PointCloud::from_points(points),
            traversals,
        })
    }

    pub fn train_ids(&self) -> Vec<u32> {
        self.traversals.iter().filter(|t| !t.held_out).map(|t| t.id).collect()
    }

    pub fn held_out_id(&self) -> Option<u32> {
        self.traversals.iter().find(|t| t.held_out).map(|t| t.id)
    }

    pub fn frames_of(&self, ids: &[u32]) -> Vec<TrainingFrame> {
        self.traversals
            .iter()
            .filter(|t| ids.contains(&t.id))
            .flat_map(|t| t.frames.iter().map(ToyFrame::training_frame))
            .collect()
    }

    pub fn train_frames(&self) -> Vec<TrainingFrame> {
        self.frames_of(&self.train_ids())
    }

    pub fn held_out_frames(&self) -> Vec<TrainingFrame> {
        self.frames_of(&self.held_out_id().into_iter().collect::<Vec<_>>())
    }

    /// Camera centers of every frame, for scene bounds.
    pub fn camera_centers(&self) -> Vec<[f64; 3]> {
        self.traversals
            .iter()
            .flat_map(|t| t.frames.iter())
            .map(|f| {
                let c = f.camera.center();
                [c.x, c.y, c.z]
            })
            .collect()
    }

    /// Writes images, depth, dynamic masks, the point cloud and a manifest
    /// into `dir`; returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let cloud_path = dir.join("points.ply");
        write_ply(&self.cloud, &cloud_path)?;
        let mut traversals = Vec::new();
        for t in &self.traversals {
            let sub = dir.join(format!("t{}", t.id));
            std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            let mut frames = Vec::new();
            for (k, f) in t.frames.iter().enumerate() {
                let image = sub.join(format!("{k:03}.png"));
                let depth = sub.join(format!("{k:03}.hwsd"));
                let mask = sub.join(format!("{k:03}_dyn.png"));
                buffers::write_png_rgb(&image, &f.image)?;
                buffers::write_depth(&depth, &f.depth)?;
                let dynamic: Vec<u16> = f.valid.data.iter().map(|v| u16::from(!*v)).collect();
                buffers::write_png_gray16(&mask, f.valid.width, f.valid.height, &dynamic)?;
                frames.push(FrameRecord {
                    camera_id: "front".into(),
                    camera: f.camera.clone(),
                    image,
                    depth: Some(depth),
                    normal: None,
                    dyn_mask: Some(mask),
                    boxes: f.boxes.clone(),
                });
            }
            traversals.push(Traversal {
                id: t.id,
                condition: t.condition,
                frames,
            });
        }
        let ds = TraversalDataset {
            scene_id: "toy".into(),
            roi: None,
            point_cloud: Some(cloud_path),
            traversals,
        };
        let path = dir.join("manifest.json");
        save_manifest(&ds, &path)?;
        Ok(path)
    }
}
