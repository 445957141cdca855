//! Masked PSNR and SSIM between two images, with the dynamic region removed.
//!
//!     cargo run --release --example metrics -- a.png b.png [dynamic_mask.png]
//!
//! Without arguments a synthetic pair is scored.

use hws::buffers::{read_dynamic_mask, read_png_rgb, ImageBuf, Mask};
use hws::metrics::{psnr, ssim};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (a, b, mask) = if args.len() >= 2 {
        let a = read_png_rgb(args[0].as_ref())?;
        let b = read_png_rgb(args[1].as_ref())?;
        let mask = match args.get(2) {
            Some(p) => read_dynamic_mask(p.as_ref())?,
            None => Mask::all_valid(a.width, a.height),
        };
        (a, b, mask)
    } else {
        let (w, h) = (48, 32);
        let a = ImageBuf::from_vec(
            w,
            h,
            3,
            (0..w * h * 3).map(|i| 0.5 + 0.4 * ((i as f64) * 0.37).sin()).collect(),
        )?;
        let mut b = a.clone();
        // a corrupted block that the mask hides
        for y in 4..12 {
            for x in 4..20 {
                for c in 0..3 {
                    *b.at_mut(x, y, c) = 1.0;
                }
            }
        }
        let mut mask = Mask::all_valid(w, h);
        for y in 4..12 {
            for x in 4..20 {
                mask.data[y * w + x] = false;
            }
        }
        (a, b, mask)
    };
    let full = Mask::all_valid(a.width, a.height);
    println!("unmasked  psnr {:.3} dB  ssim {:.4}", psnr(&a, &b, &full)?, ssim(&a, &b, &full)?);
    println!("masked    psnr {:.3} dB  ssim {:.4}", psnr(&a, &b, &mask)?, ssim(&a, &b, &mask)?);
    Ok(())
}
