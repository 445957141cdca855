//! Finite-difference gradient checks shared by the gradient tests and the
//! acceptance run. Each returns relative errors per parameter family.

use hws::buffers::Mask;
use hws::losses::{total_loss, LossTargets, LossWeights};
use hws::rasterizer::{render, render_backward, RenderGrads, Splat};
use hws::scene::{backward_view, decode_view, Scene};

use super::*;

fn splat_loss(splats: &[Splat], up: &RenderGrads) -> f64 {
    let cam = camera(32, 32, 40.0);
    let (out, _) = render(splats, &cam, &smooth_settings());
    linear_functional(&out, up)
}

/// Position, rotation, scale, opacity and color of `n` random splats.
pub fn splat_errors(seed: u64, n: usize) -> Vec<(String, f64)> {
    let h = 1e-6;
    let mut r = rng(100 + seed);
    let mut splats = random_splats(&mut r, n, 0.9);
    let cam = camera(32, 32, 40.0);
    let (out, ctx) = render(&splats, &cam, &smooth_settings());
    let mut up = random_upstream(&mut rng(seed), 32, 32);
    mask_weak_coverage(&mut up, &out, 1e-3);
    let grads = render_backward(&splats, &cam, &ctx, &up).unwrap();

    let fd = |get: &dyn Fn(&mut Splat) -> &mut f64, i: usize, splats: &mut Vec<Splat>| {
        let orig = *get(&mut splats[i]);
        *get(&mut splats[i]) = orig + h;
        let a = splat_loss(splats, &up);
        *get(&mut splats[i]) = orig - h;
        let b = splat_loss(splats, &up);
        *get(&mut splats[i]) = orig;
        (a - b) / (2.0 * h)
    };
    let (mut num, mut ana): (Vec<Vec<f64>>, Vec<Vec<f64>>) = (vec![vec![]; 5], vec![vec![]; 5]);
    for i in 0..splats.len() {
        for k in 0..3 {
            num[0].push(fd(&|s: &mut Splat| &mut s.position[k], i, &mut splats));
            ana[0].push(grads[i].position[k]);
            num[2].push(fd(&|s: &mut Splat| &mut s.scale[k], i, &mut splats));
            ana[2].push(grads[i].scale[k]);
            num[4].push(fd(&|s: &mut Splat| &mut s.color[k], i, &mut splats));
            ana[4].push(grads[i].color[k]);
        }
        for k in 0..4 {
            num[1].push(fd(&|s: &mut Splat| &mut s.rotation[k], i, &mut splats));
            ana[1].push(grads[i].rotation[k]);
        }
        num[3].push(fd(&|s: &mut Splat| &mut s.opacity, i, &mut splats));
        ana[3].push(grads[i].opacity);
    }
    ["position", "rotation", "scale", "opacity", "color"]
        .iter()
        .zip(num.iter().zip(&ana))
        .map(|(name, (n, a))| (name.to_string(), rel_err(n, a)))
        .collect()
}

fn scene_loss(scene: &Scene, z: &[f32], up: &RenderGrads) -> f64 {
    let cam = camera(24, 24, 30.0);
    let view = decode_view(scene, &cam, z).unwrap();
    let (out, _) = render(&view.splats, &cam, &smooth_settings());
    linear_functional(&out, up)
}

/// Every parameter group of the tiny scene plus the rendered latent. With
/// `max_per_group` set, each group is subsampled evenly to about that many
/// entries; otherwise every scalar is checked.
pub fn scene_errors(seed: u64, max_per_group: Option<usize>) -> Vec<(String, f64)> {
    let h = 1e-4;
    let mut scene = tiny_scene(seed);
    let cam = camera(24, 24, 30.0);
    let z = scene.appearance.row(0).to_vec();
    let view = decode_view(&scene, &cam, &z).unwrap();
    let (out, ctx) = render(&view.splats, &cam, &smooth_settings());
    let mut up = random_upstream(&mut rng(seed), 24, 24);
    mask_weak_coverage(&mut up, &out, 1e-3);
    let sg = render_backward(&view.splats, &cam, &ctx, &up).unwrap();
    let mut grads = backward_view(&scene, &view, &sg, true).unwrap();
    let dz = scene.dims.latent_dim;
    grads.scene.groups[16][..dz].copy_from_slice(&grads.latent);

    let mut errs = Vec::new();
    for (gi, group) in Scene::param_groups().iter().enumerate() {
        let n = scene.group(gi).len();
        let step = max_per_group.map_or(1, |m| (n / m).max(1));
        let mut num = Vec::new();
        let mut ana = Vec::new();
        for k in (0..n).step_by(step) {
            // the appearance row is also the latent being rendered with
            let is_z_row = gi == 16 && k < dz;
            let mut v = scene.group_mut(gi)[k];
            let d = fd_f32(&mut v, h, |v| {
                let mut s = scene.clone();
                s.group_mut(gi)[k] = *v;
                let zz = if is_z_row { s.appearance.row(0).to_vec() } else { z.clone() };
                scene_loss(&s, &zz, &up)
            });
            num.push(d);
            ana.push(grads.scene.groups[gi][k]);
        }
        errs.push((group.name.to_string(), rel_err(&num, &ana)));
    }

    let mut num = Vec::new();
    let mut zz = z.clone();
    for k in 0..dz {
        let mut v = zz[k];
        num.push(fd_f32(&mut v, h, |v| {
            zz[k] = *v;
            let l = scene_loss(&scene, &zz, &up);
            zz[k] = z[k];
            l
        }));
    }
    errs.push(("latent".into(), rel_err(&num, &grads.latent)));
    errs
}

/// Positions through the full weighted loss, D-SSIM included.
pub fn total_loss_error() -> f64 {
    let h = 1e-6;
    let mut r = rng(7);
    let mut splats = random_splats(&mut r, 8, 0.8);
    let cam = camera(20, 20, 25.0);
    let settings = smooth_settings();
    let mut color = random_image(&mut r, 20, 20, 3);
    color.data.iter_mut().for_each(|v| *v = 0.5 + 0.4 * *v);
    let mut depth = random_image(&mut r, 20, 20, 1);
    depth.data.iter_mut().for_each(|v| *v += 4.0);
    let normal = random_image(&mut r, 20, 20, 3);
    let mut valid = Mask::all_valid(20, 20);
    valid.data[7] = false;
    let targets = LossTargets {
        color: &color,
        valid: &valid,
        depth: Some(&depth),
        normal: Some(&normal),
    };
    let weights = LossWeights {
        depth: 0.3,
        normal: 0.2,
        dssim: 0.25,
    };
    let loss = |s: &[Splat]| {
        let (out, _) = render(s, &cam, &settings);
        total_loss(&out, &targets, &weights).unwrap().0.total
    };
    let (out, ctx) = render(&splats, &cam, &settings);
    let (_, up) = total_loss(&out, &targets, &weights).unwrap();
    let g = render_backward(&splats, &cam, &ctx, &up).unwrap();
    let mut num = Vec::new();
    let mut ana = Vec::new();
    for i in 0..splats.len() {
        for k in 0..3 {
            let o = splats[i].position[k];
            splats[i].position[k] = o + h;
            let a = loss(&splats);
            splats[i].position[k] = o - h;
            let b = loss(&splats);
            splats[i].position[k] = o;
            num.push((a - b) / (2.0 * h));
            ana.push(g[i].position[k]);
        }
    }
    rel_err(&num, &ana)
}
