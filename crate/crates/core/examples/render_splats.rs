//! Renders a handful of hand-placed Gaussians and writes color, depth, alpha
//! and normal buffers.
//!
//!     cargo run --release --example render_splats -- /tmp/splats

use std::path::PathBuf;

use hws::math::Vec3;
use hws::rasterizer::{render, CameraFrame, Intrinsics, RenderSettings, Splat};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "render_splats".into()));
    let intr = Intrinsics {
        fx: 80.0,
        fy: 80.0,
        cx: 63.5,
        cy: 47.5,
        width: 128,
        height: 96,
    };
    // camera 4 m behind the origin looking along +y, world z up
    let cam = CameraFrame::looking_at(intr, Vec3::new(0.0, -4.0, 1.0), Vec3::new(0.0, 0.0, 0.5), Vec3::z());
    let mut splats = vec![
        Splat::isotropic(Vec3::new(-0.8, 0.0, 0.6), 0.35, 0.9, [0.9, 0.2, 0.1]),
        Splat::isotropic(Vec3::new(0.0, 0.5, 0.8), 0.45, 0.8, [0.1, 0.7, 0.2]),
        Splat::isotropic(Vec3::new(0.9, -0.3, 0.5), 0.25, 0.95, [0.2, 0.3, 0.9]),
    ];
    // a flat disc lying on the ground
    splats.push(Splat {
        position: Vec3::new(0.0, 0.0, 0.0),
        rotation: [1.0, 0.0, 0.0, 0.0],
        scale: Vec3::new(2.0, 2.0, 0.01),
        opacity: 0.99,
        color: [0.5, 0.5, 0.5],
        sky: false,
    });
    let settings = RenderSettings::default();
    let (out, ctx) = render(&splats, &cam, &settings);
    out.write_dir(&dir)?;
    let covered = out.alpha.data.iter().filter(|a| **a > 0.5).count();
    println!(
        "{} visible splats, {} tile pairs, {covered}/{} pixels covered, wrote {}",
        ctx.visible().len(),
        ctx.binned_pairs(),
        out.alpha.data.len(),
        dir.display()
    );
    Ok(())
}
