use rayon::prelude::*;

use super::camera::CameraFrame;
use super::project::{project_backward_with, project_with, ScreenGaussian, ScreenGrad, Splat, SplatGrad};
use super::{RenderGrads, RenderOutput, RenderSettings};
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct RenderContext {
    fingerprint: u64,
    width: usize,
    height: usize,
    screen: Vec<ScreenGaussian>,
    tiles: Vec<Vec<u32>>,
    tiles_x: usize,
    settings: RenderSettings,
}

impl RenderContext {
    /// Visible (non-culled) splats in source order.
    pub fn visible(&self) -> &[ScreenGaussian] {
        &self.screen
    }

    pub fn settings(&self) -> &RenderSettings {
        &self.settings
    }

    /// Number of (tile, splat) pairs after binning.
    pub fn binned_pairs(&self) -> usize {
        self.tiles.iter().map(Vec::len).sum()
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }
    fn f(&mut self, v: f64) {
        for b in v.to_bits().to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
}

fn fingerprint(splats: &[Splat], cam: &CameraFrame, settings: &RenderSettings) -> u64 {
    let mut h = Fnv::new();
    h.f(splats.len() as f64);
    for s in splats {
        s.position.iter().for_each(|v| h.f(*v));
        s.rotation.iter().for_each(|v| h.f(*v));
        s.scale.iter().for_each(|v| h.f(*v));
        h.f(s.opacity);
        s.color.iter().for_each(|v| h.f(*v));
        h.f(s.sky as u8 as f64);
    }
    let k = &cam.intrinsics;
    for v in [k.fx, k.fy, k.cx, k.cy, k.width as f64, k.height as f64] {
        h.f(v);
    }
    cam.rotation.iter().for_each(|v| h.f(*v));
    cam.translation.iter().for_each(|v| h.f(*v));
    for v in [
        settings.tile_size as f64,
        settings.near,
        settings.guard_band,
        settings.low_pass,
        settings.max_alpha,
        settings.cutoff_sigma,
        settings.early_termination as u8 as f64,
        settings.min_transmittance,
        settings.alpha_eps,
    ] {
        h.f(v);
    }
    h.0
}

#[inline]
fn weight_terms(sg: &ScreenGaussian, px: f64, py: f64, cutoff: f64) -> Option<(f64, f64, f64)> {
    let dx = px - sg.mean[0];
    let dy = py - sg.mean[1];
    let m2 = sg.conic[0] * dx * dx + 2.0 * sg.conic[1] * dx * dy + sg.conic[2] * dy * dy;
    if m2 > cutoff * cutoff {
        return None;
    }
    Some(((-0.5 * m2).exp(), dx, dy))
}

/// The truncated 2D Gaussian weight of a splat at pixel center `(px, py)`.
pub fn pixel_weight(sg: &ScreenGaussian, px: f64, py: f64, settings: &RenderSettings) -> f64 {
    weight_terms(sg, px, py, settings.cutoff_sigma).map_or(0.0, |(w, _, _)| w)
}

#[derive(Clone, Copy)]
struct Step {
    local: u32,
    alpha: f64,
    transmittance: f64,
    weight: f64,
    dx: f64,
    dy: f64,
    clamped: bool,
}

/// Walks one pixel's front-to-back list, calling `visit` for every splat that
/// contributes. Returns the final transmittance.
#[inline]
fn walk_pixel(
    list: &[u32],
    screen: &[ScreenGaussian],
    px: f64,
    py: f64,
    settings: &RenderSettings,
    mut visit: impl FnMut(&ScreenGaussian, Step),
) -> f64 {
    let mut t = 1.0;
    for (local, &idx) in list.iter().enumerate() {
        let sg = &screen[idx as usize];
        let Some((w, dx, dy)) = weight_terms(sg, px, py, settings.cutoff_sigma) else {
            continue;
        };
        let raw = sg.opacity * w;
        if raw <= 0.0 {
            continue;
        }
        let clamped = raw > settings.max_alpha;
        let alpha = if clamped { settings.max_alpha } else { raw };
        visit(
            sg,
            Step {
                local: local as u32,
                alpha,
                transmittance: t,
                weight: w,
                dx,
                dy,
                clamped,
            },
        );
        t *= 1.0 - alpha;
        if settings.early_termination && t < settings.min_transmittance {
            break;
        }
    }
    t
}

#[derive(Clone, Copy, Default)]
struct PixelOut {
    color: [f64; 3],
    depth: f64,
    normal: [f64; 3],
    alpha: f64,
    sky: f64,
}

/// Front-to-back compositing of decoded splats.
///
/// Empty input yields all-zero images. Rendering is deterministic: tiles are
/// independent and each pixel is composited sequentially.
pub fn render(
    splats: &[Splat],
    cam: &CameraFrame,
    settings: &RenderSettings,
) -> (RenderOutput, RenderContext) {
    let width = cam.intrinsics.width;
    let height = cam.intrinsics.height;
    let ts = settings.tile_size.max(1);
    let tiles_x = width.div_ceil(ts);
    let tiles_y = height.div_ceil(ts);
    let cam_from_world = cam.camera_from_world();

    let screen: Vec<ScreenGaussian> = splats
        .par_iter()
        .enumerate()
        .filter_map(|(i, s)| project_with(s, cam, &cam_from_world, settings, i))
        .collect();

    let mut order: Vec<u32> = (0..screen.len() as u32).collect();
    order.sort_by(|a, b| {
        let (ga, gb) = (&screen[*a as usize], &screen[*b as usize]);
        ga.depth.total_cmp(&gb.depth).then(ga.source.cmp(&gb.source))
    });

    let mut tiles: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for &idx in &order {
        let sg = &screen[idx as usize];
        // one pixel of margin keeps the box conservative under rounding
        let x0 = (sg.mean[0] - sg.extent[0] - 1.0).floor();
        let x1 = (sg.mean[0] + sg.extent[0] + 1.0).ceil();
        let y0 = (sg.mean[1] - sg.extent[1] - 1.0).floor();
        let y1 = (sg.mean[1] + sg.extent[1] + 1.0).ceil();
        if x1 < 0.0 || y1 < 0.0 || x0 > (width - 1) as f64 || y0 > (height - 1) as f64 {
            continue;
        }
        let tx0 = (x0.max(0.0) as usize) / ts;
        let tx1 = (x1.min((width - 1) as f64) as usize) / ts;
        let ty0 = (y0.max(0.0) as usize) / ts;
        let ty1 = (y1.min((height - 1) as f64) as usize) / ts;
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                tiles[ty * tiles_x + tx].push(idx);
            }
        }
    }

    let tile_outputs: Vec<Vec<PixelOut>> = (0..tiles.len())
        .into_par_iter()
        .map(|tile| {
            let (tx, ty) = (tile % tiles_x, tile / tiles_x);
            let list = &tiles[tile];
            let mut out = Vec::with_capacity(ts * ts);
            for y in ty * ts..((ty + 1) * ts).min(height) {
                for x in tx * ts..((tx + 1) * ts).min(width) {
                    let mut p = PixelOut::default();
                    let mut depth_num = 0.0;
                    let mut normal_raw = Vec3::zeros();
                    let t_final = walk_pixel(list, &screen, x as f64, y as f64, settings, |sg, s| {
                        let wt = s.alpha * s.transmittance;
                        for c in 0..3 {
                            p.color[c] += sg.color[c] * wt;
                        }
                        depth_num += sg.depth * wt;
                        normal_raw += sg.normal * wt;
                        if sg.sky {
                            p.sky += wt;
                        }
                    });
                    p.alpha = 1.0 - t_final;
                    p.depth = depth_num / p.alpha.max(settings.alpha_eps);
                    let len = normal_raw.norm();
                    if p.alpha > settings.alpha_eps && len > 1e-12 {
                        let n = normal_raw / len;
                        p.normal = [n.x, n.y, n.z];
                    }
                    out.push(p);
                }
            }
            out
        })
        .collect();

    let mut output = RenderOutput::empty(width, height);
    for (tile, pixels) in tile_outputs.iter().enumerate() {
        let (tx, ty) = (tile % tiles_x, tile / tiles_x);
        let mut it = pixels.iter();
        for y in ty * ts..((ty + 1) * ts).min(height) {
            for x in tx * ts..((tx + 1) * ts).min(width) {
                let p = it.next().expect("tile pixel count");
                let i = y * width + x;
                output.color.data[3 * i..3 * i + 3].copy_from_slice(&p.color);
                output.normal.data[3 * i..3 * i + 3].copy_from_slice(&p.normal);
                output.depth.data[i] = p.depth;
                output.alpha.data[i] = p.alpha;
                output.sky_alpha.data[i] = p.sky;
            }
        }
    }

    let ctx = RenderContext {
        fingerprint: fingerprint(splats, cam, settings),
        width,
        height,
        screen,
        tiles,
        tiles_x,
        settings: settings.clone(),
    };
    (output, ctx)
}

/// Gradients of `Σ_pixels <upstream, output>` with respect to every splat's
/// position, raw rotation, scale, opacity and color. Culled splats receive
/// exactly zero.
pub fn render_backward(
    splats: &[Splat],
    cam: &CameraFrame,
    ctx: &RenderContext,
    upstream: &RenderGrads,
) -> Result<Vec<SplatGrad>> {
    if ctx.fingerprint != fingerprint(splats, cam, &ctx.settings) {
        return Err(Error::GradientContextMismatch);
    }
    let (width, height) = (ctx.width, ctx.height);
    for (img, ch) in [
        (&upstream.color, 3),
        (&upstream.depth, 1),
        (&upstream.normal, 3),
        (&upstream.alpha, 1),
    ] {
        if img.width != width || img.height != height || img.channels != ch {
            return Err(Error::ShapeMismatch("upstream gradient buffers".into()));
        }
    }
    let settings = &ctx.settings;
    let ts = settings.tile_size.max(1);
    let screen = &ctx.screen;

    let tile_grads: Vec<Vec<ScreenGrad>> = (0..ctx.tiles.len())
        .into_par_iter()
        .map(|tile| {
            let (tx, ty) = (tile % ctx.tiles_x, tile / ctx.tiles_x);
            let list = &ctx.tiles[tile];
            let mut grads = vec![ScreenGrad::default(); list.len()];
            if list.is_empty() {
                return grads;
            }
            let mut steps: Vec<Step> = Vec::with_capacity(64);
            for y in ty * ts..((ty + 1) * ts).min(height) {
                for x in tx * ts..((tx + 1) * ts).min(width) {
                    steps.clear();
                    let mut depth_num = 0.0;
                    let mut normal_raw = Vec3::zeros();
                    let t_final = walk_pixel(list, screen, x as f64, y as f64, settings, |sg, s| {
                        let wt = s.alpha * s.transmittance;
                        depth_num += sg.depth * wt;
                        normal_raw += sg.normal * wt;
                        steps.push(s);
                    });
                    if steps.is_empty() {
                        continue;
                    }
                    let i = y * width + x;
                    let alpha = 1.0 - t_final;
                    let g_color = &upstream.color.data[3 * i..3 * i + 3];
                    let g_depth = upstream.depth.data[i];
                    let g_normal = Vec3::new(
                        upstream.normal.data[3 * i],
                        upstream.normal.data[3 * i + 1],
                        upstream.normal.data[3 * i + 2],
                    );
                    let mut g_alpha = upstream.alpha.data[i];

                    let g_depth_num = g_depth / alpha.max(settings.alpha_eps);
                    if alpha > settings.alpha_eps {
                        g_alpha -= g_depth * depth_num / (alpha * alpha);
                    }
                    let len = normal_raw.norm();
                    let g_normal_raw = if alpha > settings.alpha_eps && len > 1e-12 {
                        let n = normal_raw / len;
                        (g_normal - n * n.dot(&g_normal)) / len
                    } else {
                        Vec3::zeros()
                    };

                    // features per splat: color(3), depth, normal(3), 1 (alpha)
                    let g = [
                        g_color[0],
                        g_color[1],
                        g_color[2],
                        g_depth_num,
                        g_normal_raw.x,
                        g_normal_raw.y,
                        g_normal_raw.z,
                        g_alpha,
                    ];
                    let mut behind = [0.0f64; 8];
                    for s in steps.iter().rev() {
                        let sg = &screen[list[s.local as usize] as usize];
                        let f = [
                            sg.color[0],
                            sg.color[1],
                            sg.color[2],
                            sg.depth,
                            sg.normal.x,
                            sg.normal.y,
                            sg.normal.z,
                            1.0,
                        ];
                        let wt = s.alpha * s.transmittance;
                        let gs = &mut grads[s.local as usize];
                        for c in 0..3 {
                            gs.color[c] += g[c] * wt;
                        }
                        gs.depth += g[3] * wt;
                        gs.normal += g_normal_raw * wt;

                        let mut gf = 0.0;
                        let mut gb = 0.0;
                        for j in 0..8 {
                            gf += g[j] * f[j];
                            gb += g[j] * behind[j];
                        }
                        let g_a = s.transmittance * (gf - gb);
                        for j in 0..8 {
                            behind[j] = s.alpha * f[j] + (1.0 - s.alpha) * behind[j];
                        }
                        if s.clamped {
                            continue;
                        }
                        gs.opacity += g_a * s.weight;
                        let g_power = g_a * sg.opacity * s.weight;
                        let (dx, dy) = (s.dx, s.dy);
                        gs.conic[0] += -0.5 * g_power * dx * dx;
                        gs.conic[1] += -0.5 * g_power * dx * dy;
                        gs.conic[2] += -0.5 * g_power * dy * dy;
                        gs.mean[0] += g_power * (sg.conic[0] * dx + sg.conic[1] * dy);
                        gs.mean[1] += g_power * (sg.conic[1] * dx + sg.conic[2] * dy);
                    }
                }
            }
            grads
        })
        .collect();

    let mut screen_grads = vec![ScreenGrad::default(); screen.len()];
    for (tile, grads) in tile_grads.iter().enumerate() {
        for (local, g) in grads.iter().enumerate() {
            screen_grads[ctx.tiles[tile][local] as usize].add(g);
        }
    }

    let cam_from_world = cam.camera_from_world();
    let per_visible: Vec<(usize, SplatGrad)> = screen
        .par_iter()
        .zip(screen_grads.par_iter())
        .map(|(sg, g)| {
            (
                sg.source,
                project_backward_with(&splats[sg.source], cam, &cam_from_world, sg, g),
            )
        })
        .collect();
    let mut out = vec![SplatGrad::default(); splats.len()];
    for (src, g) in per_visible {
        out[src] = g;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rasterizer::camera::Intrinsics;

    fn cam(w: usize, h: usize) -> CameraFrame {
        CameraFrame::new(
            Intrinsics {
                fx: 100.0,
                fy: 100.0,
                cx: (w / 2) as f64,
                cy: (h / 2) as f64,
                width: w,
                height: h,
            },
            [1.0, 0.0, 0.0, 0.0],
            Vec3::zeros(),
        )
    }

    #[test]
    fn empty_scene_renders_zeros() {
        let (out, _) = render(&[], &cam(20, 20), &RenderSettings::default());
        assert!(out.color.data.iter().all(|v| *v == 0.0));
        assert!(out.alpha.data.iter().all(|v| *v == 0.0));
        assert!(out.depth.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn clamped_opaque_splat_on_pixel_center() {
        let s = Splat::isotropic(Vec3::new(0.0, 0.0, 5.0), 0.2, 0.999, [1.0, 0.0, 0.0]);
        let (out, _) = render(&[s], &cam(20, 20), &RenderSettings::default());
        let px = out.color.pixel(10, 10);
        assert!((px[0] - 0.99).abs() < 1e-12);
        assert_eq!(px[1], 0.0);
        assert!((out.alpha.at(10, 10, 0) - 0.99).abs() < 1e-12);
        // single splat: normalized depth is exactly its view depth
        assert!((out.depth.at(10, 10, 0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_context_is_rejected() {
        let s = Splat::isotropic(Vec3::new(0.0, 0.0, 5.0), 0.2, 0.5, [1.0, 0.0, 0.0]);
        let c = cam(20, 20);
        let (_, ctx) = render(&[s.clone()], &c, &RenderSettings::default());
        let mut moved = s;
        moved.position.x += 0.01;
        let err = render_backward(&[moved], &c, &ctx, &RenderGrads::zeros(20, 20)).unwrap_err();
        assert!(matches!(err, Error::GradientContextMismatch));
    }

    #[test]
    fn culled_splat_gets_zero_gradient() {
        let visible = Splat::isotropic(Vec3::new(0.0, 0.0, 5.0), 0.2, 0.5, [1.0, 0.0, 0.0]);
        let behind = Splat::isotropic(Vec3::new(0.0, 0.0, -5.0), 0.2, 0.5, [0.0, 1.0, 0.0]);
        let c = cam(20, 20);
        let splats = [visible, behind];
        let (_, ctx) = render(&splats, &c, &RenderSettings::default());
        let mut up = RenderGrads::zeros(20, 20);
        up.color.data.iter_mut().for_each(|v| *v = 1.0);
        let g = render_backward(&splats, &c, &ctx, &up).unwrap();
        assert!(g[0].opacity != 0.0);
        assert_eq!(g[1], SplatGrad::default());
    }
}
