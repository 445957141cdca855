use rand::Rng;

use super::encoding::DirEncoding;
use super::mlp::{Mlp, MlpCache};
use crate::error::{Error, Result};
use crate::math::{sigmoid, Vec3};

/// Code-Gaussian color head: `c = sigmoid(MLP([enc(d), z, f]))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorDecoder {
    pub mlp: Mlp,
    pub encoding: DirEncoding,
    latent_dim: usize,
    code_dim: usize,
}

pub struct ColorBatch {
    pub colors: Vec<[f64; 3]>,
    cache: MlpCache,
}

#[derive(Debug, Clone)]
pub struct ColorGrads {
    pub dirs: Vec<Vec3>,
    /// Summed over the batch (every row shares one latent).
    pub latent: Vec<f64>,
    pub codes: Vec<f64>,
    pub params: Option<Vec<f64>>,
}

impl ColorDecoder {
    pub fn input_dim(encoding: DirEncoding, latent_dim: usize, code_dim: usize) -> usize {
        encoding.dim() + latent_dim + code_dim
    }

    pub fn new(
        latent_dim: usize,
        code_dim: usize,
        hidden: &[usize],
        encoding: DirEncoding,
        rng: &mut impl Rng,
    ) -> Self {
        let mut dims = vec![Self::input_dim(encoding, latent_dim, code_dim)];
        dims.extend_from_slice(hidden);
        dims.push(3);
        Self {
            mlp: Mlp::uniform(&dims, rng),
            encoding,
            latent_dim,
            code_dim,
        }
    }

    pub fn from_mlp(mlp: Mlp, encoding: DirEncoding, latent_dim: usize, code_dim: usize) -> Result<Self> {
        let expected = Self::input_dim(encoding, latent_dim, code_dim);
        if mlp.input_dim() != expected || mlp.output_dim() != 3 {
            return Err(Error::DecoderInputShape {
                expected,
                got: mlp.input_dim(),
            });
        }
        Ok(Self {
            mlp,
            encoding,
            latent_dim,
            code_dim,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    fn check(&self, z: &[f32], codes: &[f32], rows: usize) -> Result<()> {
        if z.len() != self.latent_dim {
            return Err(Error::DecoderInputShape {
                expected: self.latent_dim,
                got: z.len(),
            });
        }
        if codes.len() != rows * self.code_dim {
            return Err(Error::DecoderInputShape {
                expected: rows * self.code_dim,
                got: codes.len(),
            });
        }
        Ok(())
    }

    /// Color of one Code-Gaussian seen along unit direction `d` under latent `z`.
    pub fn decode_code_color(&self, d: &Vec3, z: &[f32], f: &[f32]) -> Result<[f64; 3]> {
        Ok(self.forward_batch(std::slice::from_ref(d), z, f)?.colors[0])
    }

    pub fn forward_batch(&self, dirs: &[Vec3], z: &[f32], codes: &[f32]) -> Result<ColorBatch> {
        let rows = dirs.len();
        self.check(z, codes, rows)?;
        let enc = self.encoding.dim();
        let din = self.mlp.input_dim();
        let mut inputs = vec![0.0; rows * din];
        for (r, row) in inputs.chunks_mut(din).enumerate() {
            self.encoding.encode(&dirs[r], &mut row[..enc]);
            for (o, v) in row[enc..enc + self.latent_dim].iter_mut().zip(z) {
                *o = *v as f64;
            }
            let code = &codes[r * self.code_dim..(r + 1) * self.code_dim];
            for (o, v) in row[enc + self.latent_dim..].iter_mut().zip(code) {
                *o = *v as f64;
            }
        }
        let cache = self.mlp.forward_batch(&inputs, rows)?;
        let colors = cache
            .output()
            .chunks(3)
            .map(|o| [sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2])])
            .collect();
        Ok(ColorBatch { colors, cache })
    }

    pub fn backward_batch(
        &self,
        batch: &ColorBatch,
        dirs: &[Vec3],
        g_colors: &[[f64; 3]],
        with_params: bool,
    ) -> Result<ColorGrads> {
        let rows = batch.colors.len();
        if dirs.len() != rows || g_colors.len() != rows {
            return Err(Error::GradientContextMismatch);
        }
        let mut upstream = Vec::with_capacity(rows * 3);
        for (c, g) in batch.colors.iter().zip(g_colors) {
            for ch in 0..3 {
                upstream.push(g[ch] * c[ch] * (1.0 - c[ch]));
            }
        }
        let grads = self.mlp.backward(&batch.cache, &upstream, with_params)?;
        let enc = self.encoding.dim();
        let din = self.mlp.input_dim();
        let mut latent = vec![0.0; self.latent_dim];
        let mut codes = Vec::with_capacity(rows * self.code_dim);
        let mut d_dirs = Vec::with_capacity(rows);
        for (r, row) in grads.inputs.chunks(din).enumerate() {
            d_dirs.push(self.encoding.backward(&dirs[r], &row[..enc]));
            for (l, v) in latent.iter_mut().zip(&row[enc..enc + self.latent_dim]) {
                *l += v;
            }
            codes.extend_from_slice(&row[enc + self.latent_dim..]);
        }
        Ok(ColorGrads {
            dirs: d_dirs,
            latent,
            codes,
            params: grads.params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_gives_mid_gray() {
        let dec = ColorDecoder::from_mlp(Mlp::zeros(&[3 + 4 + 2, 8, 3]), DirEncoding::Raw, 4, 2).unwrap();
        let c = dec
            .decode_code_color(&Vec3::new(0.0, 0.0, 1.0), &[0.3; 4], &[1.0, -1.0])
            .unwrap();
        assert_eq!(c, [0.5, 0.5, 0.5]);
    }

    #[test]
    fn latent_shape_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dec = ColorDecoder::new(4, 2, &[8], DirEncoding::Raw, &mut rng);
        let err = dec
            .decode_code_color(&Vec3::new(0.0, 0.0, 1.0), &[0.0; 3], &[0.0; 2])
            .unwrap_err();
        assert!(err.to_string().contains("decoder input shape"));
    }

    #[test]
    fn different_latents_change_color() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dec = ColorDecoder::new(16, 16, &[64, 64], DirEncoding::Raw, &mut rng);
        let f: Vec<f32> = (0..16).map(|i| (i as f32 * 0.37).sin() * 0.1).collect();
        let d = Vec3::new(0.6, 0.0, 0.8);
        let za = vec![0.1f32; 16];
        let zb: Vec<f32> = (0..16).map(|i| if i % 2 == 0 { 0.3 } else { -0.3 }).collect();
        let ca = dec.decode_code_color(&d, &za, &f).unwrap();
        let cb = dec.decode_code_color(&d, &zb, &f).unwrap();
        assert!(ca.iter().zip(&cb).any(|(a, b)| (a - b).abs() > 1e-6));
        assert!(ca.iter().chain(&cb).all(|c| *c > 0.0 && *c < 1.0));
    }
}
