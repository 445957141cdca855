//! Saves a scene checkpoint, reads it back and checks the round trip is
//! bit-exact.

use hws::initializer::{init_scene, InitConfig};
use hws::scene::{read_scene, write_scene};
use hws::toy::{ToyConfig, ToyWorld};

fn main() -> anyhow::Result<()> {
    let w = ToyWorld::generate(&ToyConfig::default())?;
    let cfg = InitConfig {
        sky_count: 200,
        ..InitConfig::default()
    };
    let scene = init_scene(&w.cloud, &w.camera_centers(), &w.train_ids(), &cfg, 1)?;
    let mut bytes = Vec::new();
    write_scene(&scene, &mut bytes)?;
    let back = read_scene(&mut bytes.as_slice())?;
    let mut again = Vec::new();
    write_scene(&back, &mut again)?;
    println!(
        "{} bytes, {} parameter groups, identical after reload: {}",
        bytes.len(),
        hws::scene::Scene::param_groups().len(),
        back == scene && again == bytes
    );
    Ok(())
}
