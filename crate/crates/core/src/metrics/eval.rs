use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rasterizer::{render, RenderSettings};
use crate::scene::{decode_view, Scene};
use crate::trainer::{fit_appearance_latent, FitConfig, TrainingFrame};

use super::{psnr, ssim};

/// How the appearance latent is chosen for each evaluated frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZPolicy {
    /// The frame's own stored row.
    Own,
    /// One latent per traversal, fitted on its earliest frame.
    FitFirstFrame(FitConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRow {
    pub traversal: u32,
    pub timestamp: f64,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    /// Sorted by `(traversal, timestamp)`.
    pub rows: Vec<EvalRow>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

/// Renders every frame and scores it against its image with dynamic pixels
/// masked out.
pub fn evaluate(
    scene: &Scene,
    frames: &[TrainingFrame],
    policy: ZPolicy,
    settings: &RenderSettings,
) -> Result<EvalSummary> {
    if frames.is_empty() {
        return Err(Error::EmptySplit);
    }
    let mut latents: BTreeMap<u32, Vec<f32>> = BTreeMap::new();
    match policy {
        ZPolicy::Own => {
            for f in frames {
                let j = f.camera.traversal;
                if !latents.contains_key(&j) {
                    latents.insert(j, scene.appearance.embed(j)?.to_vec());
                }
            }
        }
        ZPolicy::FitFirstFrame(fit) => {
            let mut first: BTreeMap<u32, &TrainingFrame> = BTreeMap::new();
            for f in frames {
                let e = first.entry(f.camera.traversal).or_insert(f);
                if f.camera.timestamp < e.camera.timestamp {
                    *e = f;
                }
            }
            let fitted = first
                .par_iter()
                .map(|(j, f)| {
                    fit_appearance_latent(scene, &f.image, &f.valid, &f.camera, &fit, settings).map(|z| (*j, z))
                })
                .collect::<Result<Vec<_>>>()?;
            latents.extend(fitted);
        }
    }
    let mut rows = frames
        .par_iter()
        .map(|f| {
            let z = &latents[&f.camera.traversal];
            let view = decode_view(scene, &f.camera, z)?;
            let (out, _) = render(&view.splats, &f.camera, settings);
            Ok(EvalRow {
                traversal: f.camera.traversal,
                timestamp: f.camera.timestamp,
                psnr: psnr(&out.color, &f.image, &f.valid)?,
                ssim: ssim(&out.color, &f.image, &f.valid)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.traversal.cmp(&b.traversal).then(a.timestamp.total_cmp(&b.timestamp)));
    let n = rows.len() as f64;
    let mean_psnr = rows.iter().map(|r| r.psnr).sum::<f64>() / n;
    let mean_ssim = rows.iter().map(|r| r.ssim).sum::<f64>() / n;
    Ok(EvalSummary {
        rows,
        mean_psnr,
        mean_ssim,
    })
}

pub fn write_eval_csv(summary: &EvalSummary, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "traversal,timestamp,psnr,ssim")?;
    for r in &summary.rows {
        writeln!(out, "{},{:.6},{:.6},{:.6}", r.traversal, r.timestamp, r.psnr, r.ssim)?;
    }
    writeln!(out, "mean,,{:.6},{:.6}", summary.mean_psnr, summary.mean_ssim)
}

pub fn save_eval_csv(summary: &EvalSummary, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_eval_csv(summary, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let s = EvalSummary {
            rows: vec![EvalRow {
                traversal: 2,
                timestamp: 0.5,
                psnr: 30.0,
                ssim: 0.9,
            }],
            mean_psnr: 30.0,
            mean_ssim: 0.9,
        };
        let mut buf = Vec::new();
        write_eval_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "traversal,timestamp,psnr,ssim\n2,0.500000,30.000000,0.900000\nmean,,30.000000,0.900000\n"
        );
    }
}
