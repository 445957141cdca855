//! Briefly fits the toy scene, then builds a condition bundle for moving a
//! vehicle from one frame into another camera: static background render,
//! source and target box masks, box list and the fitted latent.
//!
//!     cargo run --release --example condition_bundle -- /tmp/bundle

use std::path::PathBuf;

use hws::buffers::Mask;
use hws::condition::{build_bundle, export_bundle, SourceFrame};
use hws::initializer::{init_scene, InitConfig};
use hws::rasterizer::RenderSettings;
use hws::toy::{ToyConfig, ToyWorld};
use hws::trainer::{train, FitConfig, TrainConfig};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "bundle".into()));
    let w = ToyWorld::generate(&ToyConfig::default())?;
    let init = InitConfig {
        sky_count: 400,
        ..InitConfig::default()
    };
    let mut scene = init_scene(&w.cloud, &w.camera_centers(), &w.train_ids(), &init, 0)?;
    let cfg = TrainConfig {
        iterations: 300,
        ..TrainConfig::default()
    };
    train(&mut scene, &w.train_frames(), &cfg)?;

    let src = &w.traversals[0].frames[2];
    let target = &w.traversals[1].frames[3].camera;
    let valid = Mask::all_valid(src.image.width, src.image.height);
    let bundle = build_bundle(
        &scene,
        &SourceFrame {
            image: &src.image,
            image_path: None,
            valid: Some(&valid),
            boxes: &src.boxes,
            camera: &src.camera,
        },
        target,
        &FitConfig::default(),
        &RenderSettings::default(),
    )?;
    export_bundle(&bundle, &dir, 0)?;
    println!(
        "source mask {} px, target mask {} px, {} boxes, wrote {}",
        bundle.mask_src.ids.iter().filter(|i| **i > 0).count(),
        bundle.mask_tgt.ids.iter().filter(|i| **i > 0).count(),
        bundle.boxes.len(),
        dir.display()
    );
    Ok(())
}
