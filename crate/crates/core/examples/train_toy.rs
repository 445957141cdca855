//! Trains on the toy scene's two training traversals, then scores the train
//! split with stored latents and the held-out traversal with a latent fitted
//! on its first frame.
//!
//!     cargo run --release --example train_toy -- [iterations] [out.hws]

use std::path::PathBuf;

use hws::initializer::{init_scene, InitConfig};
use hws::metrics::{evaluate, ZPolicy};
use hws::rasterizer::RenderSettings;
use hws::scene::save_scene;
use hws::toy::{ToyConfig, ToyWorld};
use hws::trainer::{moving_average, train, FitConfig, TrainConfig};

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(500);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "toy.hws".into()));

    let world = ToyWorld::generate(&ToyConfig::default())?;
    let init = InitConfig {
        sky_count: 400,
        ..InitConfig::default()
    };
    let mut scene = init_scene(&world.cloud, &world.camera_centers(), &world.train_ids(), &init, 0)?;
    let frames = world.train_frames();
    let cfg = TrainConfig {
        iterations,
        ..TrainConfig::default()
    };
    let report = train(&mut scene, &frames, &cfg)?;
    let psnr: Vec<f64> = report.stats.iter().map(|s| s.psnr).collect();
    let smooth = moving_average(&psnr, 50);
    for i in (0..iterations).step_by((iterations / 10).max(1)) {
        println!("iter {i:5}  loss {:.5}  psnr(avg) {:.2}", report.stats[i].loss_total, smooth[i]);
    }

    let settings = RenderSettings::default();
    let train_eval = evaluate(&scene, &frames, ZPolicy::Own, &settings)?;
    let novel_eval = evaluate(
        &scene,
        &world.held_out_frames(),
        ZPolicy::FitFirstFrame(FitConfig::default()),
        &settings,
    )?;
    println!("train  psnr {:.2} dB  ssim {:.4}", train_eval.mean_psnr, train_eval.mean_ssim);
    println!("novel  psnr {:.2} dB  ssim {:.4}", novel_eval.mean_psnr, novel_eval.mean_ssim);
    save_scene(&scene, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
