use std::f64::consts::PI;

use crate::math::Vec3;

/// How the unit view direction is presented to a decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirEncoding {
    /// The three direction components as-is.
    Raw,
    /// `[d, sin(2^k π d), cos(2^k π d)]` for `k < frequencies`.
    Fourier { frequencies: u32 },
}

impl Default for DirEncoding {
    fn default() -> Self {
        DirEncoding::Raw
    }
}

impl DirEncoding {
    pub fn dim(&self) -> usize {
        match self {
            DirEncoding::Raw => 3,
            DirEncoding::Fourier { frequencies } => 3 + 6 * *frequencies as usize,
        }
    }

    pub fn encode(&self, d: &Vec3, out: &mut [f64]) {
        out[..3].copy_from_slice(&[d.x, d.y, d.z]);
        if let DirEncoding::Fourier { frequencies } = self {
            for k in 0..*frequencies as usize {
                let f = (1u64 << k) as f64 * PI;
                for c in 0..3 {
                    out[3 + 6 * k + c] = (f * d[c]).sin();
                    out[3 + 6 * k + 3 + c] = (f * d[c]).cos();
                }
            }
        }
    }

    pub fn backward(&self, d: &Vec3, g: &[f64]) -> Vec3 {
        let mut out = Vec3::new(g[0], g[1], g[2]);
        if let DirEncoding::Fourier { frequencies } = self {
            for k in 0..*frequencies as usize {
                let f = (1u64 << k) as f64 * PI;
                for c in 0..3 {
                    out[c] += g[3 + 6 * k + c] * f * (f * d[c]).cos();
                    out[c] -= g[3 + 6 * k + 3 + c] * f * (f * d[c]).sin();
                }
            }
        }
        out
    }

    /// Stable integer tag used in checkpoints.
    pub(crate) fn tag(&self) -> u32 {
        match self {
            DirEncoding::Raw => 0,
            DirEncoding::Fourier { frequencies } => *frequencies,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Self {
        if tag == 0 {
            DirEncoding::Raw
        } else {
            DirEncoding::Fourier { frequencies: tag }
        }
    }
}

/// Gradient of the unit direction `(x - o)/|x - o|` pulled back to `x`.
pub fn direction_backward(dir: &Vec3, dist: f64, g: &Vec3) -> Vec3 {
    (g - dir * dir.dot(g)) / dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_backward_matches_finite_differences() {
        let enc = DirEncoding::Fourier { frequencies: 3 };
        let d = Vec3::new(0.3, -0.5, 0.81);
        let g: Vec<f64> = (0..enc.dim()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let f = |d: &Vec3| {
            let mut out = vec![0.0; enc.dim()];
            enc.encode(d, &mut out);
            out.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
        };
        let analytic = enc.backward(&d, &g);
        for c in 0..3 {
            let mut p = d;
            let mut m = d;
            p[c] += 1e-6;
            m[c] -= 1e-6;
            let fd = (f(&p) - f(&m)) / 2e-6;
            assert!((fd - analytic[c]).abs() < 1e-6);
        }
    }

    #[test]
    fn tags_round_trip() {
        for e in [DirEncoding::Raw, DirEncoding::Fourier { frequencies: 4 }] {
            assert_eq!(DirEncoding::from_tag(e.tag()), e);
        }
    }
}
