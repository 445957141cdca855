//! Runs the region-of-interest acceptance test on a few synthetic tracks.

use hws::dataset::{roi_trigger, Roi, Trajectory, TrajectorySample};

fn track(points: &[[f64; 2]], dt: f64) -> hws::Result<Trajectory> {
    Trajectory::new(
        points
            .iter()
            .enumerate()
            .map(|(i, p)| TrajectorySample {
                time: i as f64 * dt,
                position: *p,
            })
            .collect(),
    )
}

fn main() -> anyhow::Result<()> {
    let roi = Roi::new([0.0, 0.0], 50.0)?;
    let straight: Vec<[f64; 2]> = (0..=30).map(|i| [-30.0 + 2.0 * i as f64, 5.0]).collect();
    let passing: Vec<[f64; 2]> = (0..=30).map(|i| [-80.0 + 6.0 * i as f64, 20.0]).collect();
    let cases = [
        ("slow straight drive", track(&straight, 1.0)?),
        ("same drive in 6 s", track(&straight, 0.2)?),
        ("crosses the disk", track(&passing, 1.0)?),
        ("parked", track(&[[0.0, 0.0], [0.5, 0.0]], 30.0)?),
    ];
    for (name, t) in &cases {
        let d = roi_trigger(t, &roi);
        println!(
            "{name:22} {:6}  duration {:5.1} s  length {:6.1} m  overlap {:.3}",
            if d.accepted { "accept" } else { "reject" },
            d.diagnostics.duration,
            d.diagnostics.length,
            d.diagnostics.overlap
        );
    }
    Ok(())
}
