//! Writes the synthetic street scene to disk as an ordinary dataset
//! (manifest, PNG frames, depth, dynamic masks, point cloud).
//!
//!     cargo run --release --example toy_dataset -- /tmp/toy

use std::path::PathBuf;

use hws::toy::{ToyConfig, ToyWorld};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "toy_data".into()));
    let world = ToyWorld::generate(&ToyConfig::default())?;
    let manifest = world.write(&dir)?;
    for t in &world.traversals {
        println!(
            "traversal {} ({:?}{}): {} frames",
            t.id,
            t.condition,
            if t.held_out { ", held out" } else { "" },
            t.frames.len()
        );
    }
    println!("{} points, manifest at {}", world.cloud.len(), manifest.display());
    Ok(())
}
