use rand::Rng;

use super::encoding::DirEncoding;
use super::mlp::{Mlp, MlpCache};
use crate::error::{Error, Result};
use crate::math::{normalize_quat, normalize_quat_backward, sigmoid, Vec3};

/// Output head layout of the scaffold network, per (anchor, offset) row.
pub const HEAD_OFFSET: usize = 0;
pub const HEAD_QUAT: usize = 3;
pub const HEAD_LOG_SCALE: usize = 7;
pub const HEAD_OPACITY: usize = 10;
pub const HEAD_COLOR: usize = 11;
pub const HEAD_WIDTH: usize = 14;

/// Anchor fields a decode needs, borrowed from whatever stores them.
#[derive(Debug, Clone, Copy)]
pub struct AnchorView<'a> {
    pub position: [f32; 3],
    pub code: &'a [f32],
    /// `K * D_o` values, offset-major.
    pub offset_codes: &'a [f32],
    pub log_radius: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedOffset {
    pub position: Vec3,
    /// Unit quaternion `[w, x, y, z]`.
    pub rotation: [f64; 4],
    pub scale: Vec3,
    pub opacity: f64,
    pub color: [f64; 3],
}

/// Upstream gradient on one decoded offset Gaussian. `rotation` is taken
/// with respect to the unit quaternion handed to the renderer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecodedOffsetGrad {
    pub position: Vec3,
    pub rotation: [f64; 4],
    pub scale: Vec3,
    pub opacity: f64,
    pub color: [f64; 3],
}

pub struct ScaffoldBatch {
    pub decoded: Vec<DecodedOffset>,
    raw_quat_norms: Vec<f64>,
    tanh_offsets: Vec<[f64; 3]>,
    radii: Vec<f64>,
    cache: MlpCache,
}

#[derive(Debug, Clone)]
pub struct ScaffoldGrads {
    pub latent: Vec<f64>,
    /// Per anchor, `D_a` values each.
    pub anchor_codes: Vec<f64>,
    /// Per anchor, `K * D_o` values each.
    pub offset_codes: Vec<f64>,
    pub log_radii: Vec<f64>,
    pub params: Option<Vec<f64>>,
}

/// Decodes an anchor into `K` neural Gaussians:
/// `MLP([z, x̃_A, f_A, f_k, enc(d)])` with `x̃_A` the anchor position
/// normalized by the scene center and half-extent.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaffoldDecoder {
    pub mlp: Mlp,
    pub encoding: DirEncoding,
    latent_dim: usize,
    anchor_code_dim: usize,
    offset_code_dim: usize,
    offsets: usize,
    pub position_center: [f32; 3],
    pub position_scale: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaffoldShape {
    pub latent_dim: usize,
    pub anchor_code_dim: usize,
    pub offset_code_dim: usize,
    pub offsets: usize,
}

impl ScaffoldDecoder {
    pub fn input_dim(shape: &ScaffoldShape, encoding: DirEncoding) -> usize {
        shape.latent_dim + 3 + shape.anchor_code_dim + shape.offset_code_dim + encoding.dim()
    }

    /// Random init with the quaternion head biased to identity and the
    /// log-scale head biased to `init_log_scale`.
    pub fn new(
        shape: ScaffoldShape,
        hidden: &[usize],
        encoding: DirEncoding,
        init_log_scale: f32,
        position_center: [f32; 3],
        position_scale: f32,
        rng: &mut impl Rng,
    ) -> Self {
        let mut dims = vec![Self::input_dim(&shape, encoding)];
        dims.extend_from_slice(hidden);
        dims.push(HEAD_WIDTH);
        let mut mlp = Mlp::uniform(&dims, rng);
        init_head_bias(&mut mlp, init_log_scale);
        Self::from_parts(mlp, encoding, shape, position_center, position_scale)
            .expect("dims built from shape")
    }

    /// All weights zero except the quaternion bias, which is `(1,0,0,0)`.
    pub fn zeroed(shape: ScaffoldShape, hidden: &[usize], encoding: DirEncoding) -> Self {
        let mut dims = vec![Self::input_dim(&shape, encoding)];
        dims.extend_from_slice(hidden);
        dims.push(HEAD_WIDTH);
        let mut mlp = Mlp::zeros(&dims);
        init_head_bias(&mut mlp, 0.0);
        Self::from_parts(mlp, encoding, shape, [0.0; 3], 1.0).expect("dims built from shape")
    }

    pub fn from_parts(
        mlp: Mlp,
        encoding: DirEncoding,
        shape: ScaffoldShape,
        position_center: [f32; 3],
        position_scale: f32,
    ) -> Result<Self> {
        let expected = Self::input_dim(&shape, encoding);
        if mlp.input_dim() != expected || mlp.output_dim() != HEAD_WIDTH {
            return Err(Error::DecoderInputShape {
                expected,
                got: mlp.input_dim(),
            });
        }
        Ok(Self {
            mlp,
            encoding,
            latent_dim: shape.latent_dim,
            anchor_code_dim: shape.anchor_code_dim,
            offset_code_dim: shape.offset_code_dim,
            offsets: shape.offsets,
            position_center,
            position_scale,
        })
    }

    pub fn shape(&self) -> ScaffoldShape {
        ScaffoldShape {
            latent_dim: self.latent_dim,
            anchor_code_dim: self.anchor_code_dim,
            offset_code_dim: self.offset_code_dim,
            offsets: self.offsets,
        }
    }

    pub fn offsets(&self) -> usize {
        self.offsets
    }

    fn check(&self, z: &[f32], anchor: &AnchorView) -> Result<()> {
        let want = [
            (z.len(), self.latent_dim),
            (anchor.code.len(), self.anchor_code_dim),
            (anchor.offset_codes.len(), self.offsets * self.offset_code_dim),
        ];
        for (got, expected) in want {
            if got != expected {
                return Err(Error::DecoderInputShape { expected, got });
            }
        }
        Ok(())
    }

    /// The `K` Gaussians spawned by one anchor seen along `d`.
    pub fn decode_anchor(&self, z: &[f32], anchor: AnchorView, d: &Vec3) -> Result<Vec<DecodedOffset>> {
        Ok(self.forward_batch(z, &[anchor], std::slice::from_ref(d))?.decoded)
    }

    /// Decodes every anchor; output is anchor-major, `K` rows per anchor.
    pub fn forward_batch(&self, z: &[f32], anchors: &[AnchorView], dirs: &[Vec3]) -> Result<ScaffoldBatch> {
        if dirs.len() != anchors.len() {
            return Err(Error::DecoderInputShape {
                expected: anchors.len(),
                got: dirs.len(),
            });
        }
        for a in anchors {
            self.check(z, a)?;
        }
        let k = self.offsets;
        let din = self.mlp.input_dim();
        let rows = anchors.len() * k;
        let enc = self.encoding.dim();
        let mut inputs = vec![0.0; rows * din];
        let mut enc_buf = vec![0.0; enc];
        let scale = self.position_scale as f64;
        for (a, anchor) in anchors.iter().enumerate() {
            self.encoding.encode(&dirs[a], &mut enc_buf);
            for o in 0..k {
                let row = &mut inputs[(a * k + o) * din..(a * k + o + 1) * din];
                let mut at = 0;
                for v in z {
                    row[at] = *v as f64;
                    at += 1;
                }
                for c in 0..3 {
                    row[at] = (anchor.position[c] as f64 - self.position_center[c] as f64) / scale;
                    at += 1;
                }
                for v in anchor.code {
                    row[at] = *v as f64;
                    at += 1;
                }
                let oc = &anchor.offset_codes[o * self.offset_code_dim..(o + 1) * self.offset_code_dim];
                for v in oc {
                    row[at] = *v as f64;
                    at += 1;
                }
                row[at..].copy_from_slice(&enc_buf);
            }
        }
        let cache = self.mlp.forward_batch(&inputs, rows)?;
        let mut decoded = Vec::with_capacity(rows);
        let mut norms = Vec::with_capacity(rows);
        let mut tanhs = Vec::with_capacity(rows);
        let mut radii = Vec::with_capacity(anchors.len());
        for (a, anchor) in anchors.iter().enumerate() {
            let r = (anchor.log_radius as f64).exp();
            radii.push(r);
            let base = Vec3::new(
                anchor.position[0] as f64,
                anchor.position[1] as f64,
                anchor.position[2] as f64,
            );
            for o in 0..k {
                let h = &cache.output()[(a * k + o) * HEAD_WIDTH..(a * k + o + 1) * HEAD_WIDTH];
                let t = [h[0].tanh(), h[1].tanh(), h[2].tanh()];
                let (q, n) = normalize_quat([h[3], h[4], h[5], h[6]]);
                decoded.push(DecodedOffset {
                    position: base + Vec3::new(t[0], t[1], t[2]) * r,
                    rotation: q,
                    scale: Vec3::new(h[7].exp(), h[8].exp(), h[9].exp()),
                    opacity: sigmoid(h[HEAD_OPACITY]),
                    color: [sigmoid(h[11]), sigmoid(h[12]), sigmoid(h[13])],
                });
                norms.push(n);
                tanhs.push(t);
            }
        }
        Ok(ScaffoldBatch {
            decoded,
            raw_quat_norms: norms,
            tanh_offsets: tanhs,
            radii,
            cache,
        })
    }

    /// Pulls gradients on decoded Gaussians back to the latent, codes,
    /// radii and (optionally) network weights. Anchor positions and view
    /// directions are treated as constants.
    pub fn backward_batch(
        &self,
        batch: &ScaffoldBatch,
        grads: &[DecodedOffsetGrad],
        with_params: bool,
    ) -> Result<ScaffoldGrads> {
        let rows = batch.decoded.len();
        if grads.len() != rows {
            return Err(Error::GradientContextMismatch);
        }
        let k = self.offsets;
        let anchors = batch.radii.len();
        let mut upstream = vec![0.0; rows * HEAD_WIDTH];
        let mut log_radii = vec![0.0; anchors];
        for (row, (dec, g)) in batch.decoded.iter().zip(grads).enumerate() {
            let a = row / k;
            let r = batch.radii[a];
            let t = batch.tanh_offsets[row];
            let u = &mut upstream[row * HEAD_WIDTH..(row + 1) * HEAD_WIDTH];
            for c in 0..3 {
                u[HEAD_OFFSET + c] = g.position[c] * r * (1.0 - t[c] * t[c]);
                log_radii[a] += g.position[c] * t[c] * r;
            }
            let gq = normalize_quat_backward(dec.rotation, batch.raw_quat_norms[row], g.rotation);
            u[HEAD_QUAT..HEAD_QUAT + 4].copy_from_slice(&gq);
            for c in 0..3 {
                u[HEAD_LOG_SCALE + c] = g.scale[c] * dec.scale[c];
                u[HEAD_COLOR + c] = g.color[c] * dec.color[c] * (1.0 - dec.color[c]);
            }
            u[HEAD_OPACITY] = g.opacity * dec.opacity * (1.0 - dec.opacity);
        }
        let mg = self.mlp.backward(&batch.cache, &upstream, with_params)?;
        let din = self.mlp.input_dim();
        let (dz, da, dof) = (self.latent_dim, self.anchor_code_dim, self.offset_code_dim);
        let mut latent = vec![0.0; dz];
        let mut anchor_codes = vec![0.0; anchors * da];
        let mut offset_codes = vec![0.0; anchors * k * dof];
        for (row, g) in mg.inputs.chunks(din).enumerate() {
            let a = row / k;
            for (l, v) in latent.iter_mut().zip(&g[..dz]) {
                *l += v;
            }
            let ac = &g[dz + 3..dz + 3 + da];
            for (o, v) in anchor_codes[a * da..(a + 1) * da].iter_mut().zip(ac) {
                *o += v;
            }
            offset_codes[row * dof..(row + 1) * dof].copy_from_slice(&g[dz + 3 + da..dz + 3 + da + dof]);
        }
        Ok(ScaffoldGrads {
            latent,
            anchor_codes,
            offset_codes,
            log_radii,
            params: mg.params,
        })
    }
}

fn init_head_bias(mlp: &mut Mlp, init_log_scale: f32) {
    let bias = mlp.output_bias_mut();
    bias.fill(0.0);
    bias[HEAD_QUAT] = 1.0;
    for c in 0..3 {
        bias[HEAD_LOG_SCALE + c] = init_log_scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape() -> ScaffoldShape {
        ScaffoldShape {
            latent_dim: 4,
            anchor_code_dim: 5,
            offset_code_dim: 2,
            offsets: 8,
        }
    }

    #[test]
    fn zero_network_sits_on_anchor() {
        let dec = ScaffoldDecoder::zeroed(shape(), &[16], DirEncoding::Raw);
        let code = [0.3f32; 5];
        let offs = [0.1f32; 16];
        let anchor = AnchorView {
            position: [1.0, 2.0, 3.0],
            code: &code,
            offset_codes: &offs,
            log_radius: 0.0,
        };
        let out = dec
            .decode_anchor(&[0.0; 4], anchor, &Vec3::new(0.0, 0.0, 1.0))
            .unwrap();
        assert_eq!(out.len(), 8);
        for g in out {
            assert_eq!(g.position, Vec3::new(1.0, 2.0, 3.0));
            assert_eq!(g.opacity, 0.5);
            assert_eq!(g.rotation, [1.0, 0.0, 0.0, 0.0]);
            assert_eq!(g.scale, Vec3::repeat(1.0));
        }
    }

    #[test]
    fn outputs_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dec = ScaffoldDecoder::new(shape(), &[32, 32], DirEncoding::Raw, -1.4, [0.0; 3], 10.0, &mut rng);
        let code: Vec<f32> = (0..5).map(|i| i as f32 * 3.0 - 6.0).collect();
        let offs: Vec<f32> = (0..16).map(|i| (i as f32).sin() * 20.0).collect();
        let anchor = AnchorView {
            position: [4.0, -2.0, 1.0],
            code: &code,
            offset_codes: &offs,
            log_radius: 0.5,
        };
        let r = 0.5f64.exp();
        for g in dec
            .decode_anchor(&[5.0, -5.0, 2.0, 0.0], anchor, &Vec3::new(0.6, 0.8, 0.0))
            .unwrap()
        {
            let off = g.position - Vec3::new(4.0, -2.0, 1.0);
            assert!(off.iter().all(|v| v.abs() <= r + 1e-12));
            assert!((crate::math::quat_norm(g.rotation) - 1.0).abs() < 1e-12);
            assert!(g.scale.iter().all(|s| *s > 0.0));
            assert!(g.opacity > 0.0 && g.opacity < 1.0);
            assert!(g.color.iter().all(|c| *c >= 0.0 && *c <= 1.0));
        }
    }

    #[test]
    fn wrong_code_width_is_rejected() {
        let dec = ScaffoldDecoder::zeroed(shape(), &[4], DirEncoding::Raw);
        let code = [0.0f32; 4];
        let offs = [0.0f32; 16];
        let anchor = AnchorView {
            position: [0.0; 3],
            code: &code,
            offset_codes: &offs,
            log_radius: 0.0,
        };
        let err = dec
            .decode_anchor(&[0.0; 4], anchor, &Vec3::new(0.0, 0.0, 1.0))
            .unwrap_err();
        assert!(err.to_string().contains("decoder input shape"));
    }
}
