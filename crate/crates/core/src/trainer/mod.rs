//! Adam optimization of every scene parameter over multi-traversal frames.

mod adam;
mod frames;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use frames::{load_frames, TrainingFrame};

use std::io::Write;
use std::path::{Path, PathBuf};

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::buffers::{ImageBuf, Mask};
use crate::error::{Error, Result};
use crate::losses::{rgb_loss, total_loss, LossTargets, LossWeights};
use crate::metrics::{masked_mse, psnr_from_mse};
use crate::rasterizer::{render, render_backward, CameraFrame, RenderSettings};
use crate::scene::{backward_view, decode_view, save_scene, GroupKind, Scene};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub position: f64,
    /// Position rate at the last iteration, as a fraction of `position`.
    pub position_final_factor: f64,
    pub rotation: f64,
    pub scale: f64,
    pub opacity: f64,
    pub code: f64,
    pub radius: f64,
    pub mlp: f64,
    pub appearance: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position: 1.6e-4,
            position_final_factor: 0.01,
            rotation: 1e-3,
            scale: 5e-3,
            opacity: 5e-2,
            code: 2e-3,
            radius: 5e-3,
            mlp: 2e-3,
            appearance: 2e-3,
        }
    }
}

impl LearningRates {
    /// Per-group rates at `iter` of `total`; positions decay exponentially.
    pub fn for_iteration(&self, iter: usize, total: usize) -> Vec<f64> {
        let f = if total > 1 {
            iter as f64 / (total - 1) as f64
        } else {
            0.0
        };
        let pos = self.position * self.position_final_factor.powf(f);
        Scene::param_groups()
            .iter()
            .map(|g| match g.kind {
                GroupKind::Position => pos,
                GroupKind::Rotation => self.rotation,
                GroupKind::Scale => self.scale,
                GroupKind::Opacity => self.opacity,
                GroupKind::Code => self.code,
                GroupKind::Radius => self.radius,
                GroupKind::Mlp => self.mlp,
                GroupKind::Appearance => self.appearance,
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.position,
            self.rotation,
            self.scale,
            self.opacity,
            self.code,
            self.radius,
            self.mlp,
            self.appearance,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite())
            && self.position_final_factor > 0.0
            && self.position_final_factor.is_finite()
        {
            Ok(())
        } else {
            Err(Error::Config("learning rates must be > 0".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr: LearningRates,
    pub weights: LossWeights,
    pub seed: u64,
    /// Integer image downscale applied when frames are loaded.
    pub downscale: usize,
    pub render: RenderSettings,
    /// Write a checkpoint every this many iterations (0 = never).
    pub checkpoint_interval: usize,
    pub checkpoint_dir: Option<PathBuf>,
    /// Derive normal supervision from depth when no normal file exists.
    pub normals_from_depth: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2_000,
            lr: LearningRates::default(),
            weights: LossWeights::default(),
            seed: 0,
            downscale: 1,
            render: RenderSettings::default(),
            checkpoint_interval: 0,
            checkpoint_dir: None,
            normals_from_depth: false,
        }
    }
}

impl TrainConfig {
    /// Iteration count of the full-scale schedule.
    pub const FULL_ITERATIONS: usize = 90_000;

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations > 0 required".into()));
        }
        if self.downscale == 0 {
            return Err(Error::Config("downscale > 0 required".into()));
        }
        self.lr.validate()?;
        self.weights.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterStats {
    pub iter: usize,
    pub loss_total: f64,
    pub loss_rgb: f64,
    pub loss_depth: f64,
    pub loss_normal: f64,
    /// PSNR of this iteration's render against its frame.
    pub psnr: f64,
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub stats: Vec<IterStats>,
    pub skipped_grads: u64,
    pub checkpoints: Vec<PathBuf>,
}

pub const STATS_HEADER: &str = "iter,loss_total,loss_rgb,loss_depth,loss_normal,psnr_snapshot";

pub fn write_stats_csv(stats: &[IterStats], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{STATS_HEADER}")?;
    for s in stats {
        writeln!(
            out,
            "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.6}",
            s.iter, s.loss_total, s.loss_rgb, s.loss_depth, s.loss_normal, s.psnr
        )?;
    }
    Ok(())
}

pub fn save_stats_csv(stats: &[IterStats], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_stats_csv(stats, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Registers a row for every traversal seen in `frames` that the scene does
/// not know yet. New rows start at the mean of existing rows, or zero.
pub fn register_traversals(scene: &mut Scene, frames: &[TrainingFrame]) -> Result<()> {
    for f in frames {
        let j = f.camera.traversal;
        if scene.appearance.index_of(j).is_none() {
            let row = scene
                .appearance
                .mean_row()
                .unwrap_or_else(|_| vec![0.0; scene.dims.latent_dim]);
            info!("registering appearance row for traversal {j}");
            scene.appearance.register(j, &row)?;
        }
    }
    if scene.appearance.default_id.is_none() {
        scene.appearance.default_id = scene.appearance.ids().first().copied();
    }
    Ok(())
}

/// Optimizes `scene` in place: one uniformly sampled frame per iteration,
/// its traversal's latent, full loss, backprop and an Adam step on every
/// parameter group. Deterministic for a given seed.
pub fn train(scene: &mut Scene, frames: &[TrainingFrame], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::Config("dataset has no frames".into()));
    }
    scene.validate()?;
    register_traversals(scene, frames)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::for_scene(scene);
    let mut stats = Vec::with_capacity(cfg.iterations);
    let mut checkpoints = Vec::new();
    let app_group = Scene::param_groups()
        .iter()
        .position(|g| g.kind == GroupKind::Appearance)
        .expect("appearance group");

    for iter in 0..cfg.iterations {
        let fi = rng.random_range(0..frames.len());
        let frame = &frames[fi];
        let row = scene
            .appearance
            .index_of(frame.camera.traversal)
            .ok_or(Error::UnknownTraversal(frame.camera.traversal))?;
        let z = scene.appearance.row(row).to_vec();

        let view = decode_view(scene, &frame.camera, &z)?;
        let (out, ctx) = render(&view.splats, &frame.camera, &cfg.render);
        let targets = LossTargets {
            color: &frame.image,
            valid: &frame.valid,
            depth: frame.depth.as_ref(),
            normal: frame.normal.as_ref(),
        };
        let (loss, upstream) = total_loss(&out, &targets, &cfg.weights)?;
        let splat_grads = render_backward(&view.splats, &frame.camera, &ctx, &upstream)?;
        let mut grads = backward_view(scene, &view, &splat_grads, true)?;
        let dz = scene.dims.latent_dim;
        grads.scene.groups[app_group][row * dz..(row + 1) * dz].copy_from_slice(&grads.latent);

        let lrs = cfg.lr.for_iteration(iter, cfg.iterations);
        adam_step(scene, &grads.scene, &mut adam, &lrs);

        let psnr = masked_mse(&out.color, &frame.image, &frame.valid)
            .map(psnr_from_mse)
            .unwrap_or(0.0);
        stats.push(IterStats {
            iter,
            loss_total: loss.total,
            loss_rgb: loss.rgb,
            loss_depth: loss.depth,
            loss_normal: loss.normal,
            psnr,
            frame: fi,
        });
        if iter % 100 == 0 || iter + 1 == cfg.iterations {
            debug!("iter {iter}: loss {:.6e} psnr {psnr:.2}", loss.total);
        }
        if cfg.checkpoint_interval > 0 && (iter + 1) % cfg.checkpoint_interval == 0 {
            if let Some(dir) = &cfg.checkpoint_dir {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let path = dir.join(format!("ckpt_{:06}.hws", iter + 1));
                save_scene(scene, &path)?;
                checkpoints.push(path);
            }
        }
    }
    Ok(TrainReport {
        stats,
        skipped_grads: adam.skipped,
        checkpoints,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub iterations: usize,
    pub lr: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            lr: 1e-2,
        }
    }
}

/// Fits a fresh appearance latent to `image` seen from `cam` with the scene
/// frozen. Starts from the mean of the stored rows and minimizes the
/// photometric loss only.
pub fn fit_appearance_latent(
    scene: &Scene,
    image: &ImageBuf,
    valid: &Mask,
    cam: &CameraFrame,
    fit: &FitConfig,
    settings: &RenderSettings,
) -> Result<Vec<f32>> {
    let mut z = scene.appearance.mean_row()?;
    let mut adam = AdamState::new(&[z.len()]);
    for _ in 0..fit.iterations {
        let view = decode_view(scene, cam, &z)?;
        let (out, ctx) = render(&view.splats, cam, settings);
        let term = rgb_loss(&out.color, image, valid)?;
        let mut upstream = crate::rasterizer::RenderGrads::zeros(out.width(), out.height());
        upstream.color = term.grad;
        let splat_grads = render_backward(&view.splats, cam, &ctx, &upstream)?;
        let grads = backward_view(scene, &view, &splat_grads, false)?;
        adam.step_tensors(&mut [&mut z], &[grads.latent], &[fit.lr]);
    }
    Ok(z)
}

/// Moving average with window `w` (shorter at the start).
pub fn moving_average(values: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for i in 0..values.len() {
        acc += values[i];
        if i >= w {
            acc -= values[i - w];
        }
        out.push(acc / (i + 1).min(w) as f64);
    }
    out
}
