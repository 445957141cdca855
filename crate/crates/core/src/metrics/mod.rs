//! PSNR and masked SSIM, plus split evaluation.

mod eval;

pub use eval::{evaluate, save_eval_csv, write_eval_csv, EvalRow, EvalSummary, ZPolicy};

use crate::buffers::{ImageBuf, Mask};
use crate::error::{Error, Result};

pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn check(a: &ImageBuf, b: &ImageBuf, mask: &Mask) -> Result<()> {
    a.check_shape(b, "metric inputs")?;
    mask.check_dims(a.width, a.height)
}

/// Mean squared error over valid pixels and all channels.
pub fn masked_mse(a: &ImageBuf, b: &ImageBuf, mask: &Mask) -> Result<f64> {
    check(a, b, mask)?;
    let c = a.channels;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, valid) in mask.data.iter().enumerate() {
        if !valid {
            continue;
        }
        for k in 0..c {
            let d = a.data[i * c + k] - b.data[i * c + k];
            sum += d * d;
        }
        n += c;
    }
    if n == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(sum / n as f64)
}

/// `10 log10(1 / MSE)` over valid pixels, capped at 99 dB.
pub fn psnr(a: &ImageBuf, b: &ImageBuf, mask: &Mask) -> Result<f64> {
    let mse = masked_mse(a, b, mask)?;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable windowed sum with zero contribution outside the image.
fn blur(src: &[f64], width: usize, height: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = SSIM_WINDOW / 2;
    let mut tmp = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, w) in win.iter().enumerate() {
                let sx = x as isize + k as isize - r as isize;
                if sx >= 0 && (sx as usize) < width {
                    acc += w * src[y * width + sx as usize];
                }
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, w) in win.iter().enumerate() {
                let sy = y as isize + k as isize - r as isize;
                if sy >= 0 && (sy as usize) < height {
                    acc += w * tmp[sy as usize * width + x];
                }
            }
            out[y * width + x] = acc;
        }
    }
    out
}

struct SsimChannel {
    /// Local SSIM at valid centers (0 elsewhere).
    map: Vec<f64>,
    /// `∂S/∂E[a]`, `∂S/∂E[a²]`, `∂S/∂E[ab]` divided by the window mass.
    partials: Option<[Vec<f64>; 3]>,
}

fn ssim_channel(a: &[f64], b: &[f64], mask: &Mask, with_grad: bool) -> SsimChannel {
    let (w, h) = (mask.width, mask.height);
    let win = gaussian_window();
    let m: Vec<f64> = mask.data.iter().map(|v| if *v { 1.0 } else { 0.0 }).collect();
    let prod = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..w * h).map(|i| m[i] * f(i)).collect() };
    let mass = blur(&m, w, h, &win);
    let sa = blur(&prod(&|i| a[i]), w, h, &win);
    let sb = blur(&prod(&|i| b[i]), w, h, &win);
    let saa = blur(&prod(&|i| a[i] * a[i]), w, h, &win);
    let sbb = blur(&prod(&|i| b[i] * b[i]), w, h, &win);
    let sab = blur(&prod(&|i| a[i] * b[i]), w, h, &win);
    let mut map = vec![0.0; w * h];
    let mut partials = with_grad.then(|| [vec![0.0; w * h], vec![0.0; w * h], vec![0.0; w * h]]);
    for i in 0..w * h {
        if !mask.data[i] {
            continue;
        }
        let n = mass[i];
        let (mu_a, mu_b) = (sa[i] / n, sb[i] / n);
        let var_a = saa[i] / n - mu_a * mu_a;
        let var_b = sbb[i] / n - mu_b * mu_b;
        let cov = sab[i] / n - mu_a * mu_b;
        let num1 = 2.0 * mu_a * mu_b + SSIM_C1;
        let num2 = 2.0 * cov + SSIM_C2;
        let den1 = mu_a * mu_a + mu_b * mu_b + SSIM_C1;
        let den2 = var_a + var_b + SSIM_C2;
        let s = (num1 * num2) / (den1 * den2);
        map[i] = s;
        if let Some([pa, paa, pab]) = partials.as_mut() {
            let d_mu = 2.0 * mu_b * num2 / (den1 * den2) - s * 2.0 * mu_a / den1;
            let d_var = -s / den2;
            let d_cov = 2.0 * num1 / (den1 * den2);
            pa[i] = (d_mu - 2.0 * mu_a * d_var - mu_b * d_cov) / n;
            paa[i] = d_var / n;
            pab[i] = d_cov / n;
        }
    }
    SsimChannel { map, partials }
}

fn ssim_checked(a: &ImageBuf, b: &ImageBuf, mask: &Mask) -> Result<usize> {
    check(a, b, mask)?;
    if a.width.min(a.height) < SSIM_WINDOW {
        return Err(Error::SsimTooSmall {
            width: a.width,
            height: a.height,
        });
    }
    let n = mask.count();
    if n == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(n)
}

fn channel(img: &ImageBuf, c: usize) -> Vec<f64> {
    img.data.iter().skip(c).step_by(img.channels).copied().collect()
}

/// Mean local SSIM over valid pixels, averaged over channels. Windows are
/// 11x11 Gaussian (σ = 1.5) restricted to valid pixels and renormalized, so
/// masked-out pixels never influence the result.
pub fn ssim(a: &ImageBuf, b: &ImageBuf, mask: &Mask) -> Result<f64> {
    let n = ssim_checked(a, b, mask)?;
    let mut total = 0.0;
    for c in 0..a.channels {
        let ch = ssim_channel(&channel(a, c), &channel(b, c), mask, false);
        total += ch.map.iter().sum::<f64>();
    }
    Ok(total / (n * a.channels) as f64)
}

/// SSIM and its gradient with respect to `a`.
pub fn ssim_with_grad(a: &ImageBuf, b: &ImageBuf, mask: &Mask) -> Result<(f64, ImageBuf)> {
    let n = ssim_checked(a, b, mask)?;
    let (w, h, cs) = (a.width, a.height, a.channels);
    let norm = 1.0 / (n * cs) as f64;
    let win = gaussian_window();
    let mut total = 0.0;
    let mut grad = ImageBuf::new(w, h, cs);
    for c in 0..cs {
        let (ca, cb) = (channel(a, c), channel(b, c));
        let ch = ssim_channel(&ca, &cb, mask, true);
        total += ch.map.iter().sum::<f64>();
        let [pa, paa, pab] = ch.partials.expect("requested");
        let ga = blur(&pa, w, h, &win);
        let gaa = blur(&paa, w, h, &win);
        let gab = blur(&pab, w, h, &win);
        for i in 0..w * h {
            if mask.data[i] {
                grad.data[i * cs + c] = norm * (ga[i] + 2.0 * ca[i] * gaa[i] + cb[i] * gab[i]);
            }
        }
    }
    Ok((total * norm, grad))
}
