#![allow(dead_code)]

pub mod grad;

use hws::buffers::ImageBuf;
use hws::decoders::{ColorDecoder, DirEncoding, ScaffoldDecoder, ScaffoldShape};
use hws::math::{Aabb, Vec3};
use hws::rasterizer::{CameraFrame, Intrinsics, RenderGrads, RenderOutput, RenderSettings, Splat};
use hws::scene::{AnchorSet, AppearanceTable, CodeGaussian, GaussianSet, Scene, SceneDims};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn camera(w: usize, h: usize, f: f64) -> CameraFrame {
    CameraFrame::new(
        Intrinsics {
            fx: f,
            fy: f,
            cx: 0.5 * (w as f64 - 1.0),
            cy: 0.5 * (h as f64 - 1.0),
            width: w,
            height: h,
        },
        [1.0, 0.0, 0.0, 0.0],
        Vec3::zeros(),
    )
}

pub fn random_quat(r: &mut impl Rng) -> [f64; 4] {
    let q: [f64; 4] = [0, 1, 2, 3].map(|_| r.random_range(-1.0..1.0));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
    q.map(|v| v / n)
}

/// Random anisotropic splats in front of an identity camera.
pub fn random_splats(r: &mut impl Rng, n: usize, max_opacity: f64) -> Vec<Splat> {
    (0..n)
        .map(|_| {
            let z = r.random_range(2.5..7.0);
            Splat {
                position: Vec3::new(r.random_range(-0.35..0.35) * z, r.random_range(-0.35..0.35) * z, z),
                rotation: random_quat(r),
                scale: Vec3::new(
                    r.random_range(0.05..0.4),
                    r.random_range(0.05..0.4),
                    r.random_range(0.02..0.4),
                ),
                opacity: r.random_range(0.1..max_opacity),
                color: [0, 1, 2].map(|_| r.random_range(0.0..1.0)),
                sky: false,
            }
        })
        .collect()
}

/// Settings that keep the forward pass smooth for finite differences.
pub fn smooth_settings() -> RenderSettings {
    RenderSettings {
        early_termination: false,
        cutoff_sigma: 6.0,
        ..RenderSettings::default()
    }
}

pub fn random_image(r: &mut impl Rng, w: usize, h: usize, c: usize) -> ImageBuf {
    let data = (0..w * h * c).map(|_| r.random_range(-1.0..1.0)).collect();
    ImageBuf::from_vec(w, h, c, data).unwrap()
}

pub fn random_upstream(r: &mut impl Rng, w: usize, h: usize) -> RenderGrads {
    RenderGrads {
        color: random_image(r, w, h, 3),
        depth: random_image(r, w, h, 1),
        normal: random_image(r, w, h, 3),
        alpha: random_image(r, w, h, 1),
    }
}

/// Zeroes the depth and normal upstream on pixels with coverage below
/// `min_alpha`. Both are normalized by coverage, so a footprint entering a
/// nearly empty pixel at its truncation radius makes them jump.
pub fn mask_weak_coverage(up: &mut RenderGrads, out: &RenderOutput, min_alpha: f64) {
    for (i, a) in out.alpha.data.iter().enumerate() {
        if *a < min_alpha {
            up.depth.data[i] = 0.0;
            up.normal.data[3 * i..3 * i + 3].fill(0.0);
        }
    }
}

/// `<upstream, output>` summed over every rendered channel.
pub fn linear_functional(out: &RenderOutput, g: &RenderGrads) -> f64 {
    let dot = |a: &ImageBuf, b: &ImageBuf| a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum::<f64>();
    dot(&out.color, &g.color) + dot(&out.depth, &g.depth) + dot(&out.normal, &g.normal) + dot(&out.alpha, &g.alpha)
}

/// `|a - b| / max(|a|, |b|)` over whole vectors.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}

/// Central difference in f64 on a value stored as f32, using the step that
/// was actually representable.
pub fn fd_f32(v: &mut f32, h: f64, mut f: impl FnMut(&f32) -> f64) -> f64 {
    let orig = *v;
    let up = (orig as f64 + h) as f32;
    let dn = (orig as f64 - h) as f32;
    *v = up;
    let fu = f(v);
    *v = dn;
    let fd = f(v);
    *v = orig;
    (fu - fd) / (up as f64 - dn as f64)
}

pub fn tiny_dims() -> SceneDims {
    SceneDims {
        code_dim: 4,
        anchor_code_dim: 4,
        offset_code_dim: 3,
        offsets: 3,
        latent_dim: 3,
    }
}

/// A small scene in front of an identity camera: two sky Gaussians, three
/// ground Gaussians, one anchor, narrow decoders and two traversals.
pub fn tiny_scene(seed: u64) -> Scene {
    let mut r = rng(seed);
    let d = tiny_dims();
    let small = |r: &mut ChaCha8Rng, n: usize| (0..n).map(|_| r.random_range(-0.5f32..0.5)).collect::<Vec<_>>();
    let mut sky = GaussianSet::new(d.code_dim);
    for i in 0..2 {
        let q = random_quat(&mut r).map(|v| v as f32);
        sky.push(&CodeGaussian {
            position: [-1.5 + 3.0 * i as f32, -1.0, 12.0 + 1.5 * i as f32],
            rotation: q,
            log_scale: [0.2, 0.0, -0.3],
            opacity_logit: 0.3,
            code: small(&mut r, d.code_dim),
        });
    }
    let mut ground = GaussianSet::new(d.code_dim);
    for i in 0..3 {
        let q = random_quat(&mut r).map(|v| v as f32);
        ground.push(&CodeGaussian {
            position: [-0.8 + 0.8 * i as f32, 0.6, 4.0 + 0.5 * i as f32],
            rotation: q,
            log_scale: [-1.2, -1.6, -2.3],
            opacity_logit: -0.2 + 0.2 * i as f32,
            code: small(&mut r, d.code_dim),
        });
    }
    let mut background = AnchorSet::new(d.anchor_code_dim, d.offset_code_dim, d.offsets);
    let code = small(&mut r, d.anchor_code_dim);
    let offs = small(&mut r, d.offsets * d.offset_code_dim);
    background.push([0.1, -0.1, 5.0], &code, &offs, -0.5);
    let enc = DirEncoding::Raw;
    let sky_decoder = ColorDecoder::new(d.latent_dim, d.code_dim, &[8], enc, &mut r);
    let ground_decoder = ColorDecoder::new(d.latent_dim, d.code_dim, &[8], enc, &mut r);
    let scaffold = ScaffoldDecoder::new(
        ScaffoldShape {
            latent_dim: d.latent_dim,
            anchor_code_dim: d.anchor_code_dim,
            offset_code_dim: d.offset_code_dim,
            offsets: d.offsets,
        },
        &[10],
        enc,
        (0.3f64).ln() as f32,
        [0.0, 0.0, 5.0],
        3.0,
        &mut r,
    );
    let mut appearance = AppearanceTable::new(d.latent_dim);
    appearance.register(1, &small(&mut r, d.latent_dim)).unwrap();
    appearance.register(2, &small(&mut r, d.latent_dim)).unwrap();
    appearance.default_id = Some(1);
    let scene = Scene {
        dims: d,
        bounds: Aabb::new([-3.0, -3.0, 0.0], [3.0, 3.0, 15.0]),
        sky,
        ground,
        background,
        sky_decoder,
        ground_decoder,
        scaffold,
        appearance,
    };
    scene.validate().unwrap();
    scene
}
