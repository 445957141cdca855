//! Derives normals from a depth map, then evaluates the Sobel-based
//! curvature and the normal loss against a perturbed copy.

use hws::buffers::{ImageBuf, Mask};
use hws::losses::{curvature_map, normal_loss, normals_from_depth};
use hws::rasterizer::Intrinsics;

fn main() -> anyhow::Result<()> {
    let (w, h) = (40, 30);
    let intr = Intrinsics {
        fx: 30.0,
        fy: 30.0,
        cx: 19.5,
        cy: 14.5,
        width: w,
        height: h,
    };
    // a tilted plane with a bump
    let depth = ImageBuf::from_vec(
        w,
        h,
        1,
        (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                let bump = 0.3 * (-((x - 20.0).powi(2) + (y - 15.0).powi(2)) / 20.0).exp();
                4.0 + 0.05 * y - bump
            })
            .collect(),
    )?;
    let n = normals_from_depth(&depth, &intr);
    let curv = curvature_map(&n)?;
    // the outer ring has no normals, so skip two pixels of border
    let inner: Vec<f64> = (2..h - 2)
        .flat_map(|y| (2..w - 2).map(move |x| (x, y)))
        .map(|(x, y)| curv.at(x, y, 0))
        .collect();
    let peak = inner.iter().cloned().fold(0.0, f64::max);
    let mean = inner.iter().sum::<f64>() / inner.len() as f64;
    println!("interior curvature: mean {mean:.4}, peak {peak:.4}");

    let mut noisy = n.clone();
    for (i, v) in noisy.data.iter_mut().enumerate() {
        *v += 0.02 * ((i as f64) * 1.7).sin();
    }
    let valid = Mask::all_valid(w, h);
    let same = normal_loss(&n, &n, &valid)?;
    let diff = normal_loss(&noisy, &n, &valid)?;
    println!("normal loss vs itself {:.6}, vs perturbed {:.6}", same.value, diff.value);
    Ok(())
}
