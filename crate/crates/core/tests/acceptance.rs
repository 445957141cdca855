//! Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
//! Runs as a plain binary so the lines always appear in `cargo test` output.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use hws::buffers::{ImageBuf, Mask};
use hws::condition::{project_box, rasterize_box_mask_depth, Box3d};
use hws::dataset::{roi_trigger, Roi, Trajectory, TrajectorySample};
use hws::initializer::{init_scene, InitConfig};
use hws::losses::{curvature_map, rgb_loss, sobel_gradients, total_loss, LossTargets, LossWeights};
use hws::math::Vec3;
use hws::metrics::{evaluate, psnr, ssim, write_eval_csv, ZPolicy};
use hws::rasterizer::{
    composite_reference, pixel_weight, project_gaussian, render, CameraFrame, Contribution, Intrinsics,
    RenderSettings,
};
use hws::scene::{decode_view, read_scene, write_scene};
use hws::toy::{ToyConfig, ToyWorld};
use hws::trainer::{train, FitConfig, TrainConfig};
use rand::Rng;

// 1
const RASTER_TOL_EXACT: f64 = 1e-6;
const RASTER_TOL_EARLY: f64 = 2e-4;
// 2
const GRAD_TOL: f64 = 1e-4;
// 3
const LINEARITY_TOL: f64 = 1e-12;
// 4, frozen after the calibration run (42.7 / 38.8 dB)
const TOY_ITERATIONS: usize = 2_000;
const TOY_TRAIN_PSNR: f64 = 35.0;
const TOY_NOVEL_PSNR: f64 = 28.0;
const TOY_ARGMIN_RATE: f64 = 0.9;
// 6
const CORNER_TOL: f64 = 1e-6;
const BOX_DEPTH_TOL: f64 = 1e-6;
// 7
const PSNR_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("rasterizer oracle equivalence", rasterizer_oracle),
        ("gradient suite", gradient_suite),
        ("loss formulas", loss_formulas),
        ("synthetic multi-traversal end-to-end", toy_end_to_end),
        ("ROI trigger table", roi_table),
        ("box geometry", box_geometry),
        ("metrics", metrics),
        ("determinism and persistence", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {}. {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

/// Max abs difference between the tiled renderer and per-pixel reference
/// compositing of the same projected splats.
fn raster_error(seed: u64, settings: &RenderSettings) -> f64 {
    let mut r = rng(seed);
    let n = r.random_range(1..=200);
    let splats = random_splats(&mut r, n, 1.0);
    let cam = camera(32, 32, 30.0);
    let (out, _) = render(&splats, &cam, settings);
    let projected: Vec<_> = splats
        .iter()
        .enumerate()
        .filter_map(|(i, s)| project_gaussian(s, &cam, settings).map(|sg| (i, sg)))
        .collect();
    let mut worst: f64 = 0.0;
    for y in 0..32 {
        for x in 0..32 {
            let mut list: Vec<(f64, usize, Contribution)> = projected
                .iter()
                .filter_map(|(i, sg)| {
                    let raw = sg.opacity * pixel_weight(sg, x as f64, y as f64, settings);
                    (raw > 0.0).then(|| {
                        (
                            sg.depth,
                            *i,
                            Contribution {
                                depth: sg.depth,
                                alpha: raw.min(settings.max_alpha),
                                color: sg.color,
                            },
                        )
                    })
                })
                .collect();
            list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let terms: Vec<Contribution> = list.into_iter().map(|t| t.2).collect();
            let px = composite_reference(&terms).unwrap();
            for c in 0..3 {
                worst = worst.max((px.color[c] - out.color.at(x, y, c)).abs());
            }
            worst = worst.max((px.alpha - out.alpha.at(x, y, 0)).abs());
        }
    }
    worst
}

fn rasterizer_oracle() -> Outcome {
    let exact = RenderSettings {
        early_termination: false,
        ..RenderSettings::default()
    };
    let early = RenderSettings::default();
    let (mut e_off, mut e_on): (f64, f64) = (0.0, 0.0);
    for seed in 0..100 {
        e_off = e_off.max(raster_error(seed, &exact));
        e_on = e_on.max(raster_error(seed, &early));
    }
    outcome(
        e_off <= RASTER_TOL_EXACT && e_on <= RASTER_TOL_EARLY,
        format!(
            "100 scenes, max err {e_off:.2e} without early termination (tol {RASTER_TOL_EXACT:e}), \
             {e_on:.2e} with (tol {RASTER_TOL_EARLY:e})"
        ),
    )
}

fn gradient_suite() -> Outcome {
    let mut worst = (String::new(), 0.0f64);
    let mut track = |name: String, e: f64| {
        if e >= worst.1 || e.is_nan() {
            worst = (name, e);
        }
    };
    for seed in 0..5 {
        for (name, e) in grad::splat_errors(seed, 10) {
            track(format!("splat {name}"), e);
        }
    }
    for seed in 0..3 {
        for (name, e) in grad::scene_errors(seed, None) {
            track(name, e);
        }
    }
    track("total loss".into(), grad::total_loss_error());
    outcome(
        worst.1 < GRAD_TOL,
        format!("worst rel err {:.2e} ({}), tol {GRAD_TOL:e}, every scene parameter checked", worst.1, worst.0),
    )
}

fn loss_formulas() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();

    // Sobel of a linear ramp with slope s is exactly 8s away from the border.
    let mut sobel_ok = true;
    for s in [0.25, -1.5, 3.0, 0.875, 1024.0] {
        for along_x in [true, false] {
            let (w, h) = (9, 7);
            let mut img = ImageBuf::new(w, h, 3);
            for y in 0..h {
                for x in 0..w {
                    for c in 0..3 {
                        let t = if along_x { x } else { y } as f64;
                        *img.at_mut(x, y, c) = s * t * (c + 1) as f64;
                    }
                }
            }
            let (gx, gy) = sobel_gradients(&img).unwrap();
            let (along, across) = if along_x { (&gx, &gy) } else { (&gy, &gx) };
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    for c in 0..3 {
                        sobel_ok &= along.at(x, y, c) == 8.0 * s * (c + 1) as f64 && across.at(x, y, c) == 0.0;
                    }
                }
            }
        }
    }
    ok &= sobel_ok;
    notes.push(format!("sobel 8s exact: {sobel_ok}"));

    let mut r = rng(3);
    let mut flat_ok = true;
    for _ in 0..20 {
        let (w, h) = (r.random_range(3..20), r.random_range(3..20));
        let vals: [f64; 3] = [0, 1, 2].map(|_| r.random_range(-1.0..1.0));
        let mut img = ImageBuf::new(w, h, 3);
        for p in img.data.chunks_mut(3) {
            p.copy_from_slice(&vals);
        }
        flat_ok &= curvature_map(&img).unwrap().data.iter().all(|v| *v == 0.0);
    }
    ok &= flat_ok;
    notes.push(format!("curvature of constants is 0: {flat_ok}"));

    // total loss is affine in the weights: L = L_rgb + λd L_d + λn L_n
    let cam = camera(24, 24, 30.0);
    let splats = random_splats(&mut r, 30, 0.9);
    let (out, _) = render(&splats, &cam, &RenderSettings::default());
    let mut color = random_image(&mut r, 24, 24, 3);
    color.data.iter_mut().for_each(|v| *v = 0.5 + 0.5 * *v);
    let mut depth = random_image(&mut r, 24, 24, 1);
    depth.data.iter_mut().for_each(|v| *v += 5.0);
    let normal = random_image(&mut r, 24, 24, 3);
    let valid = Mask::all_valid(24, 24);
    let targets = LossTargets {
        color: &color,
        valid: &valid,
        depth: Some(&depth),
        normal: Some(&normal),
    };
    let unit = LossWeights {
        depth: 1.0,
        normal: 1.0,
        dssim: 0.0,
    };
    let (base, base_g) = total_loss(&out, &targets, &unit).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let w = LossWeights {
            depth: r.random_range(0.0..2.0),
            normal: r.random_range(0.0..2.0),
            dssim: 0.0,
        };
        let (b, g) = total_loss(&out, &targets, &w).unwrap();
        let expect = base.rgb + w.depth * base.depth + w.normal * base.normal;
        worst = worst.max((b.total - expect).abs() / expect.abs().max(1.0));
        for (a, e) in g.depth.data.iter().zip(&base_g.depth.data) {
            worst = worst.max((a - w.depth * e).abs());
        }
        for (a, e) in g.normal.data.iter().zip(&base_g.normal.data) {
            worst = worst.max((a - w.normal * e).abs());
        }
    }
    ok &= worst <= LINEARITY_TOL;
    notes.push(format!("linearity err {worst:.1e} (tol {LINEARITY_TOL:e})"));
    outcome(ok, notes.join(", "))
}

fn toy_end_to_end() -> Outcome {
    let world = ToyWorld::generate(&ToyConfig::default()).unwrap();
    let init = InitConfig {
        sky_count: 400,
        ..InitConfig::default()
    };
    let mut scene = init_scene(&world.cloud, &world.camera_centers(), &world.train_ids(), &init, 0).unwrap();
    let frames = world.train_frames();
    let cfg = TrainConfig {
        iterations: TOY_ITERATIONS,
        ..TrainConfig::default()
    };
    train(&mut scene, &frames, &cfg).unwrap();
    let settings = RenderSettings::default();
    let train_eval = evaluate(&scene, &frames, ZPolicy::Own, &settings).unwrap();
    let novel_eval = evaluate(
        &scene,
        &world.held_out_frames(),
        ZPolicy::FitFirstFrame(FitConfig::default()),
        &settings,
    )
    .unwrap();

    let ids = world.train_ids();
    let correct = frames
        .iter()
        .filter(|f| {
            let losses: Vec<(u32, f64)> = ids
                .iter()
                .map(|&j| {
                    let view = decode_view(&scene, &f.camera, scene.appearance.embed(j).unwrap()).unwrap();
                    let (out, _) = render(&view.splats, &f.camera, &settings);
                    (j, rgb_loss(&out.color, &f.image, &f.valid).unwrap().value)
                })
                .collect();
            let best = losses.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
            best == f.camera.traversal
        })
        .count();
    let rate = correct as f64 / frames.len() as f64;
    outcome(
        train_eval.mean_psnr >= TOY_TRAIN_PSNR && novel_eval.mean_psnr >= TOY_NOVEL_PSNR && rate >= TOY_ARGMIN_RATE,
        format!(
            "{TOY_ITERATIONS} iterations, train {:.2} dB (min {TOY_TRAIN_PSNR}), novel {:.2} dB (min {TOY_NOVEL_PSNR}), \
             own-z argmin {correct}/{} (min {:.0}%)",
            train_eval.mean_psnr,
            novel_eval.mean_psnr,
            frames.len(),
            TOY_ARGMIN_RATE * 100.0
        ),
    )
}

/// Track along the x axis through the given x positions, timestamps evenly
/// spread over `duration`.
fn track(points: &[f64], duration: f64) -> Trajectory {
    let n = points.len() - 1;
    Trajectory::new(
        points
            .iter()
            .enumerate()
            .map(|(i, x)| TrajectorySample {
                time: if i == n { duration } else { duration * i as f64 / n as f64 },
                position: [*x, 0.0],
            })
            .collect(),
    )
    .unwrap()
}

fn roi_table() -> Outcome {
    // 200 m disk at the origin; its boundary on the track is x = 200
    let roi = Roi::new([0.0, 0.0], 200.0).unwrap();
    let cases: Vec<(&str, Trajectory, bool)> = vec![
        ("9.9 s", track(&[0.0, 30.0], 9.9), false),
        ("10.0 s", track(&[0.0, 30.0], 10.0), true),
        ("10.1 s", track(&[0.0, 30.0], 10.1), true),
        ("19 m", track(&[0.0, 19.0], 20.0), false),
        ("20 m", track(&[0.0, 20.0], 20.0), true),
        ("21 m", track(&[0.0, 21.0], 20.0), true),
        ("0.89 overlap", track(&[111.0, 200.0, 211.0], 20.0), false),
        ("0.90 overlap", track(&[110.0, 200.0, 210.0], 20.0), false),
        ("0.91 overlap", track(&[109.0, 200.0, 209.0], 20.0), true),
        ("all at minimum", track(&[-10.0, 10.0], 10.0), true),
        ("outside the disk", track(&[300.0, 400.0], 30.0), false),
        ("short and brief", track(&[0.0, 5.0], 2.0), false),
    ];
    let mut wrong = Vec::new();
    for (name, t, expect) in &cases {
        if roi_trigger(t, &roi).accepted != *expect {
            wrong.push(*name);
        }
    }
    outcome(
        wrong.is_empty(),
        format!("{} of {} trajectories as expected{}", cases.len() - wrong.len(), cases.len(), if wrong.is_empty() {
            String::new()
        } else {
            format!(", wrong: {wrong:?}")
        }),
    )
}

/// Nearest box face hit along the ray through pixel `(u, v)`, by plane
/// intersection with each of the 6 faces in camera coordinates. Returns the
/// 1-based box index and the z-depth.
fn brute_force_hit(boxes: &[Box3d], cam: &CameraFrame, u: f64, v: f64) -> Option<(u16, f64)> {
    let k = &cam.intrinsics;
    // with d.z = 1 the ray parameter is the z-depth
    let d = Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    let rot = cam.camera_from_world();
    let mut best: Option<(u16, f64)> = None;
    for (bi, b) in boxes.iter().enumerate() {
        let c = cam.to_camera(&Vec3::from(b.center));
        let axes = [
            rot * Vec3::new(b.yaw.cos(), b.yaw.sin(), 0.0),
            rot * Vec3::new(-b.yaw.sin(), b.yaw.cos(), 0.0),
            rot * Vec3::z(),
        ];
        let half = b.size.map(|s| 0.5 * s);
        for i in 0..3 {
            let den = axes[i].dot(&d);
            if den == 0.0 {
                continue;
            }
            for sign in [-1.0, 1.0] {
                let fc = c + axes[i] * (sign * half[i]);
                let t = axes[i].dot(&fc) / den;
                if t <= 0.0 {
                    continue;
                }
                let rel = d * t - fc;
                let inside = (0..3).filter(|j| *j != i).all(|j| rel.dot(&axes[j]).abs() <= half[j]);
                if inside && best.is_none_or(|(_, bt)| t < bt) {
                    best = Some(((bi + 1) as u16, t));
                }
            }
        }
    }
    best
}

fn box_geometry() -> Outcome {
    let intr = Intrinsics {
        fx: 100.0,
        fy: 100.0,
        cx: 50.0,
        cy: 40.0,
        width: 100,
        height: 80,
    };
    let cam = CameraFrame::new(intr, [1.0, 0.0, 0.0, 0.0], Vec3::zeros());
    // corners worked out by hand: x ∈ {0, 2}, y ∈ {0, 1}, z ∈ {8, 12}
    let a = Box3d {
        center: [1.0, 0.5, 10.0],
        size: [2.0, 1.0, 4.0],
        yaw: 0.0,
        category: "car".into(),
        track_id: 1,
    };
    let expect_a = [
        [50.0, 40.0],
        [75.0, 40.0],
        [50.0, 52.5],
        [75.0, 52.5],
        [50.0, 40.0],
        [50.0 + 200.0 / 12.0, 40.0],
        [50.0, 40.0 + 100.0 / 12.0],
        [50.0 + 200.0 / 12.0, 40.0 + 100.0 / 12.0],
    ];
    // yaw 90°: local x is world y, local y is world -x
    let b = Box3d {
        center: [0.0, 0.0, 10.0],
        size: [4.0, 2.0, 2.0],
        yaw: std::f64::consts::FRAC_PI_2,
        category: "truck".into(),
        track_id: 2,
    };
    let expect_b = [
        [50.0 + 100.0 / 9.0, 40.0 - 200.0 / 9.0],
        [50.0 + 100.0 / 9.0, 40.0 + 200.0 / 9.0],
        [50.0 - 100.0 / 9.0, 40.0 - 200.0 / 9.0],
        [50.0 - 100.0 / 9.0, 40.0 + 200.0 / 9.0],
        [50.0 + 100.0 / 11.0, 40.0 - 200.0 / 11.0],
        [50.0 + 100.0 / 11.0, 40.0 + 200.0 / 11.0],
        [50.0 - 100.0 / 11.0, 40.0 - 200.0 / 11.0],
        [50.0 - 100.0 / 11.0, 40.0 + 200.0 / 11.0],
    ];
    let mut corner_err: f64 = 0.0;
    for (bx, expect) in [(&a, &expect_a), (&b, &expect_b)] {
        let p = project_box(bx, &cam, 0.1).unwrap();
        for (got, want) in p.corners.iter().zip(expect.iter()) {
            corner_err = corner_err.max((got[0] - want[0]).abs()).max((got[1] - want[1]).abs());
        }
    }

    let mut r = rng(6);
    let mut id_mismatch = 0usize;
    let mut depth_err: f64 = 0.0;
    let mut hits = 0usize;
    for _ in 0..50 {
        let intr = Intrinsics {
            fx: 40.0,
            fy: 40.0,
            cx: 23.5,
            cy: 17.5,
            width: 48,
            height: 36,
        };
        let yaw = r.random_range(0.0..std::f64::consts::TAU);
        let eye = Vec3::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), r.random_range(1.0..3.0));
        let look = Vec3::new(yaw.cos(), yaw.sin(), r.random_range(-0.2..0.1));
        let cam = CameraFrame::looking_at(intr, eye, eye + look, Vec3::z());
        let n = r.random_range(1..=6);
        let boxes: Vec<Box3d> = (0..n)
            .map(|i| {
                let dist = r.random_range(6.0..25.0);
                let side = r.random_range(-0.4..0.4) * dist;
                let perp = Vec3::new(-look.y, look.x, 0.0).normalize();
                let c = eye + Vec3::new(look.x, look.y, 0.0).normalize() * dist + perp * side;
                Box3d {
                    center: [c.x, c.y, r.random_range(0.0..2.5)],
                    size: [r.random_range(1.0..5.0), r.random_range(1.0..2.5), r.random_range(1.0..3.0)],
                    yaw: r.random_range(0.0..std::f64::consts::TAU),
                    category: "car".into(),
                    track_id: i as u64,
                }
            })
            .collect();
        let maps = rasterize_box_mask_depth(&boxes, &cam);
        for y in 0..36 {
            for x in 0..48 {
                let got = maps.id(x, y);
                match brute_force_hit(&boxes, &cam, x as f64, y as f64) {
                    Some((id, z)) => {
                        hits += 1;
                        if got != id {
                            id_mismatch += 1;
                        } else {
                            depth_err = depth_err.max((maps.depth.at(x, y, 0) - z).abs());
                        }
                    }
                    None => id_mismatch += usize::from(got != 0),
                }
            }
        }
    }
    outcome(
        corner_err <= CORNER_TOL && id_mismatch == 0 && depth_err <= BOX_DEPTH_TOL,
        format!(
            "corner err {corner_err:.1e} px (tol {CORNER_TOL:e}), 50 box sets: {id_mismatch} id mismatches over \
             {hits} hit pixels, depth err {depth_err:.1e} m (tol {BOX_DEPTH_TOL:e})"
        ),
    )
}

fn metrics() -> Outcome {
    let mut r = rng(9);
    let (w, h) = (40, 30);
    let a = ImageBuf::from_vec(w, h, 3, (0..w * h * 3).map(|_| r.random_range(0.0..0.9)).collect()).unwrap();
    let b = ImageBuf::from_vec(w, h, 3, a.data.iter().map(|v| v + 0.1).collect()).unwrap();
    let all = Mask::all_valid(w, h);
    let p = psnr(&a, &b, &all).unwrap();
    let s = ssim(&a, &a, &all).unwrap();

    let mut mask = all.clone();
    for v in mask.data.iter_mut() {
        *v = r.random_bool(0.7);
    }
    let other = ImageBuf::from_vec(w, h, 3, (0..w * h * 3).map(|_| r.random_range(0.0..1.0)).collect()).unwrap();
    let mut corrupted = other.clone();
    for (i, ok) in mask.data.iter().enumerate() {
        if !ok {
            for c in 0..3 {
                corrupted.data[3 * i + c] = r.random_range(-50.0..50.0);
            }
        }
    }
    let invariant = psnr(&a, &other, &mask).unwrap().to_bits() == psnr(&a, &corrupted, &mask).unwrap().to_bits()
        && ssim(&a, &other, &mask).unwrap().to_bits() == ssim(&a, &corrupted, &mask).unwrap().to_bits();
    outcome(
        (p - 20.0).abs() <= PSNR_TOL && s == 1.0 && invariant,
        format!("PSNR of a 0.1 offset {p:.9} dB (tol {PSNR_TOL:e}), SSIM(a,a) = {s}, masked corruption invariant: {invariant}"),
    )
}

fn short_run(seed: u64, threads: usize) -> (Vec<u8>, Vec<u8>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let world = ToyWorld::generate(&ToyConfig::default()).unwrap();
        let init = InitConfig {
            sky_count: 200,
            ..InitConfig::default()
        };
        let mut scene = init_scene(&world.cloud, &world.camera_centers(), &world.train_ids(), &init, seed).unwrap();
        let frames = world.train_frames();
        let cfg = TrainConfig {
            iterations: 40,
            seed,
            ..TrainConfig::default()
        };
        train(&mut scene, &frames, &cfg).unwrap();
        let mut ckpt = Vec::new();
        write_scene(&scene, &mut ckpt).unwrap();
        let summary = evaluate(&scene, &frames, ZPolicy::Own, &RenderSettings::default()).unwrap();
        let mut csv = Vec::new();
        write_eval_csv(&summary, &mut csv).unwrap();
        (ckpt, csv)
    })
}

fn determinism() -> Outcome {
    let (c1, e1) = short_run(5, 1);
    let (c2, e2) = short_run(5, 3);
    let (c3, _) = short_run(6, 1);
    let same = c1 == c2 && e1 == e2;
    let seed_matters = c1 != c3;
    let scene = read_scene(&mut c1.as_slice()).unwrap();
    let mut again = Vec::new();
    write_scene(&scene, &mut again).unwrap();
    let round_trip = again == c1;
    outcome(
        same && seed_matters && round_trip,
        format!(
            "same seed on 1 and 3 threads bitwise identical: {same}, other seed differs: {seed_matters}, \
             save/load round trip bitwise: {round_trip} ({} byte checkpoint)",
            c1.len()
        ),
    )
}
