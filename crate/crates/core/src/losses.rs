//! Photometric, depth and normal-curvature losses with their image-space
//! gradients.

use crate::buffers::{ImageBuf, Mask};
use crate::error::{Error, Result};
use crate::metrics;
use crate::rasterizer::{Intrinsics, RenderGrads, RenderOutput};

pub const SOBEL_X: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
pub const SOBEL_Y: [[i32; 3]; 3] = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub depth: f64,
    pub normal: f64,
    /// Weight of a D-SSIM term mixed into the photometric loss:
    /// `L_rgb = (1 - w) MSE + w (1 - SSIM)`. Off by default.
    pub dssim: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            depth: 0.1,
            normal: 0.05,
            dssim: 0.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.depth, self.normal, self.dssim]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
            && self.dssim <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid loss weights {self:?}")))
        }
    }

    /// `rgb + λ_depth · depth + λ_normal · normal`.
    pub fn combine(&self, rgb: f64, depth: f64, normal: f64) -> f64 {
        rgb + self.depth * depth + self.normal * normal
    }
}

/// A scalar loss, its gradient with respect to the prediction and the number
/// of pixels that contributed.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerm {
    pub value: f64,
    pub grad: ImageBuf,
    pub valid_pixels: usize,
}

impl LossTerm {
    fn empty(like: &ImageBuf) -> Self {
        Self {
            value: 0.0,
            grad: ImageBuf::new(like.width, like.height, like.channels),
            valid_pixels: 0,
        }
    }
}

fn masked_mse_term(pred: &ImageBuf, target: &ImageBuf, valid: &[bool]) -> LossTerm {
    let c = pred.channels;
    let n = valid.iter().filter(|v| **v).count();
    let mut term = LossTerm::empty(pred);
    if n == 0 {
        return term;
    }
    let denom = (n * c) as f64;
    let mut sum = 0.0;
    for (i, ok) in valid.iter().enumerate() {
        if !ok {
            continue;
        }
        for k in 0..c {
            let d = pred.data[i * c + k] - target.data[i * c + k];
            sum += d * d;
            term.grad.data[i * c + k] = 2.0 * d / denom;
        }
    }
    term.value = sum / denom;
    term.valid_pixels = n;
    term
}

/// Mean squared error over valid pixels and the three channels.
pub fn rgb_loss(render: &ImageBuf, gt: &ImageBuf, valid: &Mask) -> Result<LossTerm> {
    render.check_shape(gt, "rgb loss")?;
    valid.check_dims(render.width, render.height)?;
    Ok(masked_mse_term(render, gt, &valid.data))
}

/// Masked depth MSE; pixels whose pseudo ground truth is non-positive or
/// non-finite are ignored.
pub fn depth_loss(render: &ImageBuf, gt: &ImageBuf, valid: &Mask) -> Result<LossTerm> {
    render.check_shape(gt, "depth loss")?;
    valid.check_dims(render.width, render.height)?;
    let ok: Vec<bool> = valid
        .data
        .iter()
        .zip(&gt.data)
        .map(|(m, d)| *m && d.is_finite() && *d > 0.0)
        .collect();
    Ok(masked_mse_term(render, gt, &ok))
}

fn check_curvature_size(n: &ImageBuf) -> Result<()> {
    if n.width < 3 || n.height < 3 {
        return Err(Error::ImageTooSmall {
            width: n.width,
            height: n.height,
        });
    }
    Ok(())
}

/// Channelwise 3x3 Sobel responses (cross-correlation, replicate padding).
pub fn sobel_gradients(n: &ImageBuf) -> Result<(ImageBuf, ImageBuf)> {
    check_curvature_size(n)?;
    let (w, h, c) = (n.width, n.height, n.channels);
    let mut gx = ImageBuf::new(w, h, c);
    let mut gy = ImageBuf::new(w, h, c);
    for y in 0..h {
        for x in 0..w {
            for dy in 0..3 {
                let sy = (y + dy).saturating_sub(1).min(h - 1);
                for dx in 0..3 {
                    let sx = (x + dx).saturating_sub(1).min(w - 1);
                    let (kx, ky) = (SOBEL_X[dy][dx] as f64, SOBEL_Y[dy][dx] as f64);
                    if kx == 0.0 && ky == 0.0 {
                        continue;
                    }
                    for ch in 0..c {
                        let v = n.at(sx, sy, ch);
                        *gx.at_mut(x, y, ch) += kx * v;
                        *gy.at_mut(x, y, ch) += ky * v;
                    }
                }
            }
        }
    }
    Ok((gx, gy))
}

/// Adjoint of [`sobel_gradients`]: scatters gradients on `(∇x, ∇y)` back to
/// the input map.
pub fn sobel_backward(gx: &ImageBuf, gy: &ImageBuf) -> Result<ImageBuf> {
    gx.check_shape(gy, "sobel backward")?;
    check_curvature_size(gx)?;
    let (w, h, c) = (gx.width, gx.height, gx.channels);
    let mut out = ImageBuf::new(w, h, c);
    for y in 0..h {
        for x in 0..w {
            for dy in 0..3 {
                let sy = (y + dy).saturating_sub(1).min(h - 1);
                for dx in 0..3 {
                    let sx = (x + dx).saturating_sub(1).min(w - 1);
                    let (kx, ky) = (SOBEL_X[dy][dx] as f64, SOBEL_Y[dy][dx] as f64);
                    for ch in 0..c {
                        *out.at_mut(sx, sy, ch) += kx * gx.at(x, y, ch) + ky * gy.at(x, y, ch);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `C(N) = Σ_c (∇x N_c)² + (∇y N_c)²`.
pub fn curvature_map(n: &ImageBuf) -> Result<ImageBuf> {
    let (gx, gy) = sobel_gradients(n)?;
    Ok(curvature_from(&gx, &gy))
}

fn curvature_from(gx: &ImageBuf, gy: &ImageBuf) -> ImageBuf {
    let c = gx.channels;
    let mut out = ImageBuf::new(gx.width, gx.height, 1);
    for i in 0..gx.pixels() {
        let mut acc = 0.0;
        for k in 0..c {
            let (a, b) = (gx.data[i * c + k], gy.data[i * c + k]);
            acc += a * a + b * b;
        }
        out.data[i] = acc;
    }
    out
}

/// Mean absolute difference of curvature maps over valid pixels.
pub fn normal_loss(pred: &ImageBuf, gt: &ImageBuf, valid: &Mask) -> Result<LossTerm> {
    pred.check_shape(gt, "normal loss")?;
    valid.check_dims(pred.width, pred.height)?;
    let (gx, gy) = sobel_gradients(pred)?;
    let c_pred = curvature_from(&gx, &gy);
    let c_gt = curvature_map(gt)?;
    let n = valid.count();
    let mut term = LossTerm::empty(pred);
    if n == 0 {
        return Ok(term);
    }
    let inv = 1.0 / n as f64;
    let mut sum = 0.0;
    let mut d_curv = vec![0.0; pred.pixels()];
    for (i, ok) in valid.data.iter().enumerate() {
        if !ok {
            continue;
        }
        let d = c_pred.data[i] - c_gt.data[i];
        sum += d.abs();
        d_curv[i] = if d > 0.0 {
            inv
        } else if d < 0.0 {
            -inv
        } else {
            0.0
        };
    }
    let ch = pred.channels;
    let mut ggx = ImageBuf::new(pred.width, pred.height, ch);
    let mut ggy = ImageBuf::new(pred.width, pred.height, ch);
    for i in 0..pred.pixels() {
        for k in 0..ch {
            ggx.data[i * ch + k] = 2.0 * gx.data[i * ch + k] * d_curv[i];
            ggy.data[i * ch + k] = 2.0 * gy.data[i * ch + k] * d_curv[i];
        }
    }
    term.value = sum * inv;
    term.grad = sobel_backward(&ggx, &ggy)?;
    term.valid_pixels = n;
    Ok(term)
}

/// Camera-frame normals from a z-depth map by central differences of the
/// back-projected points, oriented toward the camera. Pixels without a full
/// positive-depth neighborhood get a zero normal.
pub fn normals_from_depth(depth: &ImageBuf, intr: &Intrinsics) -> ImageBuf {
    let (w, h) = (depth.width, depth.height);
    let mut out = ImageBuf::new(w, h, 3);
    let point = |x: usize, y: usize| {
        let d = depth.data[y * w + x];
        nalgebra::Vector3::new((x as f64 - intr.cx) / intr.fx * d, (y as f64 - intr.cy) / intr.fy * d, d)
    };
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let ds = [(x, y), (x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)];
            if ds.iter().any(|(a, b)| !(depth.data[b * w + a] > 0.0)) {
                continue;
            }
            let tx = point(x + 1, y) - point(x - 1, y);
            let ty = point(x, y + 1) - point(x, y - 1);
            let Some(mut n) = tx.cross(&ty).try_normalize(1e-12) else {
                continue;
            };
            if n.dot(&point(x, y)) > 0.0 {
                n = -n;
            }
            out.data[3 * (y * w + x)..3 * (y * w + x) + 3].copy_from_slice(&[n.x, n.y, n.z]);
        }
    }
    out
}

/// Per-frame supervision.
#[derive(Debug, Clone, Copy)]
pub struct LossTargets<'a> {
    pub color: &'a ImageBuf,
    /// `false` on dynamic-object pixels.
    pub valid: &'a Mask,
    pub depth: Option<&'a ImageBuf>,
    pub normal: Option<&'a ImageBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub rgb: f64,
    pub depth: f64,
    pub normal: f64,
    /// No valid photometric pixels in this frame.
    pub no_valid_pixels: bool,
    /// Depth supervision missing or entirely non-positive.
    pub no_depth_supervision: bool,
    /// Normal supervision missing.
    pub no_normal_supervision: bool,
}

/// Sky coverage at or above this fraction removes a pixel from the
/// geometric losses.
pub const SKY_EXCLUSION: f64 = 0.5;

/// `L_rgb + λ_depth L_depth + λ_normal L_normal` and the matching upstream
/// gradients for [`crate::rasterizer::render_backward`].
pub fn total_loss(
    out: &RenderOutput,
    targets: &LossTargets,
    weights: &LossWeights,
) -> Result<(LossBreakdown, RenderGrads)> {
    weights.validate()?;
    let (w, h) = (out.width(), out.height());
    let mut grads = RenderGrads::zeros(w, h);
    let mut b = LossBreakdown::default();

    let rgb = rgb_loss(&out.color, targets.color, targets.valid)?;
    b.no_valid_pixels = rgb.valid_pixels == 0;
    if weights.dssim > 0.0 && rgb.valid_pixels > 0 && w.min(h) >= metrics::SSIM_WINDOW {
        let (s, gs) = metrics::ssim_with_grad(&out.color, targets.color, targets.valid)?;
        let k = weights.dssim;
        b.rgb = (1.0 - k) * rgb.value + k * (1.0 - s);
        for ((g, m), d) in grads.color.data.iter_mut().zip(&rgb.grad.data).zip(&gs.data) {
            *g = (1.0 - k) * m - k * d;
        }
    } else {
        b.rgb = rgb.value;
        grads.color.data.copy_from_slice(&rgb.grad.data);
    }

    let geometric = Mask {
        width: w,
        height: h,
        data: targets
            .valid
            .data
            .iter()
            .zip(&out.sky_alpha.data)
            .map(|(v, s)| *v && *s < SKY_EXCLUSION)
            .collect(),
    };
    match targets.depth {
        Some(gt) if weights.depth > 0.0 => {
            let t = depth_loss(&out.depth, gt, &geometric)?;
            b.no_depth_supervision = t.valid_pixels == 0;
            b.depth = t.value;
            for (g, v) in grads.depth.data.iter_mut().zip(&t.grad.data) {
                *g = weights.depth * v;
            }
        }
        Some(_) => {}
        None => b.no_depth_supervision = true,
    }
    match targets.normal {
        Some(gt) if weights.normal > 0.0 => {
            let t = normal_loss(&out.normal, gt, &geometric)?;
            b.normal = t.value;
            for (g, v) in grads.normal.data.iter_mut().zip(&t.grad.data) {
                *g = weights.normal * v;
            }
        }
        Some(_) => {}
        None => b.no_normal_supervision = true,
    }
    b.total = weights.combine(b.rgb, b.depth, b.normal);
    Ok((b, grads))
}
