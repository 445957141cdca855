//! Loads a dataset manifest, summarizes its traversals and loads the frames
//! at half resolution.
//!
//!     cargo run --release --example load_dataset -- path/to/manifest.json

use hws::dataset::{load_manifest, roi_trigger, Roi};
use hws::trainer::load_frames;

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .ok_or_else(|| anyhow::anyhow!("usage: load_dataset <manifest.json>"))?;
    let ds = load_manifest(path.as_ref())?;
    println!("scene {}: {} frames", ds.scene_id, ds.frame_count());
    // fall back to a disk around the first camera when the manifest has no ROI
    let roi = match ds.roi {
        Some(r) => r,
        None => {
            let c = ds.frames().next().map(|f| f.camera.center()).unwrap_or_default();
            Roi::new([c.x, c.y], 200.0)?
        }
    };
    for t in &ds.traversals {
        let d = roi_trigger(&t.trajectory()?, &roi);
        let boxes: usize = t.frames.iter().map(|f| f.boxes.len()).sum();
        println!(
            "traversal {} ({:?}): {} frames, {boxes} boxes, {:.1} s over {:.1} m, roi {}",
            t.id,
            t.condition,
            t.frames.len(),
            d.diagnostics.duration,
            d.diagnostics.length,
            if d.accepted { "accept" } else { "reject" }
        );
    }
    let frames = load_frames(&ds, 2, true)?;
    let valid: usize = frames.iter().map(|f| f.valid.count()).sum();
    let pixels: usize = frames.iter().map(|f| f.valid.data.len()).sum();
    println!(
        "loaded {} frames at half size, {:.1}% static pixels",
        frames.len(),
        100.0 * valid as f64 / pixels as f64
    );
    Ok(())
}
