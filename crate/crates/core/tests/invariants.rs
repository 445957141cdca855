//! Property tests for invariants that hold for any input.

mod common;

use approx::assert_relative_eq;
use common::*;
use hws::buffers::{decode_depth, encode_depth, ImageBuf, Mask};
use hws::condition::Box3d;
use hws::dataset::{roi_trigger, segment_length_inside, Roi, Trajectory, TrajectorySample};
use hws::math::{matrix_to_quat, normalize_quat, quat_to_matrix, sigmoid, logit, Vec3};
use hws::metrics::{psnr, ssim};
use hws::rasterizer::{render, RenderSettings, Splat};
use hws::scene::{read_scene, write_scene};
use proptest::prelude::*;

fn splats_strategy(max: usize) -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coverage_and_color_are_bounded((seed, n) in splats_strategy(40)) {
        let splats = random_splats(&mut rng(seed), n, 1.0);
        let (out, _) = render(&splats, &camera(24, 24, 20.0), &RenderSettings::default());
        for i in 0..24 * 24 {
            let a = out.alpha.data[i];
            prop_assert!((0.0..=1.0).contains(&a));
            // colors lie in [0, 1], so the composite cannot exceed coverage
            for c in 0..3 {
                let v = out.color.data[3 * i + c];
                prop_assert!(v >= 0.0 && v <= a + 1e-12);
            }
            prop_assert!(out.sky_alpha.data[i] <= a + 1e-12);
        }
    }

    #[test]
    fn render_ignores_input_order((seed, n) in splats_strategy(30), rot in 0usize..30) {
        let splats = random_splats(&mut rng(seed), n, 0.9);
        let mut shuffled = splats.clone();
        shuffled.rotate_left(rot % n);
        let cam = camera(20, 20, 20.0);
        let settings = RenderSettings::default();
        let (a, _) = render(&splats, &cam, &settings);
        let (b, _) = render(&shuffled, &cam, &settings);
        // random depths are distinct, so only floating-point order is involved
        for (x, y) in a.color.data.iter().zip(&b.color.data) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn transparent_splats_change_nothing((seed, n) in splats_strategy(20)) {
        let mut r = rng(seed);
        let splats = random_splats(&mut r, n, 0.9);
        let mut with_ghosts = splats.clone();
        for s in random_splats(&mut r, 5, 0.9) {
            with_ghosts.push(Splat { opacity: 0.0, ..s });
        }
        let cam = camera(20, 20, 20.0);
        let settings = RenderSettings::default();
        let (a, _) = render(&splats, &cam, &settings);
        let (b, _) = render(&with_ghosts, &cam, &settings);
        prop_assert_eq!(a.color, b.color);
        prop_assert_eq!(a.alpha, b.alpha);
    }

    #[test]
    fn quaternion_matrix_round_trip(q in prop::array::uniform4(-1.0f64..1.0)) {
        prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-3);
        let (u, _) = normalize_quat(q);
        let m = quat_to_matrix(u);
        assert_relative_eq!((m * m.transpose()), hws::math::Mat3::identity(), epsilon = 1e-12);
        assert_relative_eq!(m.determinant(), 1.0, epsilon = 1e-12);
        let back = matrix_to_quat(&m);
        // q and -q are the same rotation
        let s = if back.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        for k in 0..4 {
            prop_assert!((back[k] * s - u[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn logit_inverts_sigmoid(x in -20.0f64..20.0) {
        assert_relative_eq!(logit(sigmoid(x)), x, epsilon = 1e-6);
    }

    #[test]
    fn segment_inside_length_is_additive(
        a in prop::array::uniform2(-300.0f64..300.0),
        b in prop::array::uniform2(-300.0f64..300.0),
        t in 0.0f64..1.0,
        radius in 1.0f64..250.0,
    ) {
        let roi = Roi::new([10.0, -5.0], radius).unwrap();
        let m = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let whole = segment_length_inside(a, b, &roi);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        prop_assert!(whole >= 0.0 && whole <= len + 1e-9);
        let parts = segment_length_inside(a, m, &roi) + segment_length_inside(m, b, &roi);
        prop_assert!((whole - parts).abs() < 1e-7 * (1.0 + len));
    }

    #[test]
    fn roi_diagnostics_are_consistent(pts in prop::collection::vec(prop::array::uniform2(-100.0f64..100.0), 2..12)) {
        let traj = Trajectory::new(
            pts.iter().enumerate().map(|(i, p)| TrajectorySample { time: i as f64 * 1.5, position: *p }).collect(),
        ).unwrap();
        let d = roi_trigger(&traj, &Roi::new([0.0, 0.0], 60.0).unwrap());
        prop_assert!((0.0..=1.0).contains(&d.diagnostics.overlap));
        prop_assert_eq!(d.diagnostics.duration, (pts.len() - 1) as f64 * 1.5);
        prop_assert_eq!(
            d.accepted,
            d.diagnostics.duration >= 10.0 && d.diagnostics.length >= 20.0 && d.diagnostics.overlap > 0.9
        );
    }

    #[test]
    fn box_corners_average_to_center(
        c in prop::array::uniform3(-50.0f64..50.0),
        s in prop::array::uniform3(0.1f64..10.0),
        yaw in -7.0f64..7.0,
    ) {
        let b = Box3d { center: c, size: s, yaw, category: String::new(), track_id: 0 };
        let mean = b.corners().iter().fold(Vec3::zeros(), |acc, p| acc + p) / 8.0;
        assert_relative_eq!(mean, Vec3::from(c), epsilon = 1e-9);
        // every ray from outside toward the center hits
        let origin = Vec3::from(c) + Vec3::new(40.0, -30.0, 25.0);
        let dir = (Vec3::from(c) - origin).normalize();
        let t = b.ray_hit(&origin, &dir).unwrap();
        prop_assert!(t > 0.0 && t < 60.0);
    }

    #[test]
    fn depth_codec_round_trips(seed in any::<u64>(), w in 1usize..20, h in 1usize..20) {
        let img = random_image(&mut rng(seed), w, h, 1);
        let back = decode_depth(&encode_depth(&img).unwrap()).unwrap();
        prop_assert_eq!((back.width, back.height, back.channels), (w, h, 1));
        for (a, b) in img.data.iter().zip(&back.data) {
            prop_assert_eq!(*a as f32, *b as f32);
        }
    }

    #[test]
    fn metrics_are_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_image(&mut r, 16, 14, 3);
        let b = random_image(&mut r, 16, 14, 3);
        let m = Mask::all_valid(16, 14);
        prop_assert_eq!(psnr(&a, &b, &m).unwrap(), psnr(&b, &a, &m).unwrap());
        assert_relative_eq!(ssim(&a, &b, &m).unwrap(), ssim(&b, &a, &m).unwrap(), epsilon = 1e-12);
        prop_assert!(ssim(&a, &b, &m).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn downscaling_a_constant_keeps_it(v in 0.0f64..1.0, f in 1usize..5) {
        let img = ImageBuf::filled(12, 10, 3, v);
        let d = img.downscale(f);
        prop_assert!(d.data.iter().all(|x| (x - v).abs() < 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn checkpoint_round_trip_is_bitwise(seed in any::<u64>()) {
        let scene = tiny_scene(seed);
        let mut bytes = Vec::new();
        write_scene(&scene, &mut bytes).unwrap();
        let back = read_scene(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &scene);
        let mut again = Vec::new();
        write_scene(&back, &mut again).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn truncated_checkpoints_are_rejected(seed in any::<u64>(), cut in 0.0f64..1.0) {
        let mut bytes = Vec::new();
        write_scene(&tiny_scene(seed), &mut bytes).unwrap();
        let n = ((bytes.len() - 1) as f64 * cut) as usize;
        prop_assert!(read_scene(&mut &bytes[..n]).is_err());
    }
}
