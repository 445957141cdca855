//! Trains briefly, then fits an appearance latent for the held-out traversal
//! from a single frame and compares it with the stored training latents.

use hws::initializer::{init_scene, InitConfig};
use hws::metrics::psnr;
use hws::rasterizer::{render, RenderSettings};
use hws::scene::decode_view;
use hws::toy::{ToyConfig, ToyWorld};
use hws::trainer::{fit_appearance_latent, train, FitConfig, TrainConfig};

fn main() -> anyhow::Result<()> {
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

    let settings = RenderSettings::default();
    let frames = w.held_out_frames();
    let first = &frames[0];
    let z = fit_appearance_latent(&scene, &first.image, &first.valid, &first.camera, &FitConfig::default(), &settings)?;
    let score = |z: &[f32]| -> hws::Result<f64> {
        let f = &frames[frames.len() - 1];
        let view = decode_view(&scene, &f.camera, z)?;
        let (out, _) = render(&view.splats, &f.camera, &settings);
        psnr(&out.color, &f.image, &f.valid)
    };
    for j in w.train_ids() {
        println!("stored latent of traversal {j}: {:.2} dB on the last held-out frame", score(scene.appearance.embed(j)?)?);
    }
    println!("latent fitted on the first frame: {:.2} dB", score(&z)?);
    Ok(())
}
