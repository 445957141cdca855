//! Builds the initial hybrid scene (sky dome, ground plane, background
//! anchors) from a point cloud and saves it as a checkpoint.
//!
//!     cargo run --release --example init_scene -- [points.ply] [out.hws]
//!
//! Without arguments the toy scene's point cloud is used.

use std::path::PathBuf;

use hws::initializer::{init_scene, read_ply, InitConfig};
use hws::scene::save_scene;
use hws::toy::{ToyConfig, ToyWorld};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let cloud_arg = args.next();
    let out = PathBuf::from(args.next().unwrap_or_else(|| "init.hws".into()));
    let (cloud, extra, ids) = match cloud_arg {
        Some(p) => (read_ply(p.as_ref())?, Vec::new(), vec![0]),
        None => {
            let w = ToyWorld::generate(&ToyConfig::default())?;
            (w.cloud.clone(), w.camera_centers(), w.train_ids())
        }
    };
    let cfg = InitConfig {
        sky_count: 400,
        ..InitConfig::default()
    };
    let scene = init_scene(&cloud, &extra, &ids, &cfg, 0)?;
    println!(
        "{} points -> {} sky, {} ground, {} anchors ({} parameters)",
        cloud.len(),
        scene.sky.len(),
        scene.ground.len(),
        scene.background.len(),
        scene.param_count()
    );
    save_scene(&scene, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
