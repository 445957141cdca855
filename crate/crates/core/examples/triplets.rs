//! Samples generator training triplets from one toy traversal and writes
//! stage-1 targets (ground truth with vehicles grayed out and noise added).
//!
//!     cargo run --release --example triplets -- /tmp/triplets

use std::path::PathBuf;

use hws::buffers::write_png_rgb;
use hws::condition::{sample_triplet, stage1_target, TargetKind, DEFAULT_NOISE_SIGMA};
use hws::toy::{ToyConfig, ToyWorld};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "triplets".into()));
    std::fs::create_dir_all(&dir)?;
    let w = ToyWorld::generate(&ToyConfig::default())?;
    let t = &w.traversals[0];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for n in 0..6 {
        let gt = rng.random_range(0..t.frames.len());
        let tri = sample_triplet(t.id, t.frames.len(), gt, TargetKind::MaskedNoisy, &mut rng)?;
        let f = &t.frames[tri.gt];
        let target = stage1_target(&f.image, &f.boxes, &f.camera, DEFAULT_NOISE_SIGMA, n)?;
        let path = dir.join(format!("target_{n}.png"));
        write_png_rgb(&path, &target)?;
        println!("gt {} src {} tgt {} -> {}", tri.gt, tri.src, tri.tgt, path.display());
    }
    Ok(())
}
