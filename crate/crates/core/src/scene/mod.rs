//! The hybrid scene: sky and ground Code-Gaussians, background anchors,
//! their decoders and the per-traversal appearance table.

mod appearance;
mod checkpoint;
mod params;
mod view;

pub use appearance::{embed_traversal, AppearanceTable};
pub use checkpoint::{load_scene, read_scene, save_scene, write_scene, FORMAT_VERSION, MAGIC};
pub use params::{GroupKind, ParamGroup, SceneGrads};
pub use view::{backward_view, decode_view, DecodedView, NodeKind, ViewGrads};

use crate::decoders::{AnchorView, ColorDecoder, ScaffoldDecoder};
use crate::error::{Error, Result};
use crate::math::{sigmoid, Aabb};

/// Code and network sizes shared by every node of one scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneDims {
    /// `D_f`, Code-Gaussian feature width.
    pub code_dim: usize,
    /// `D_a`, anchor code width.
    pub anchor_code_dim: usize,
    /// `D_o`, per-offset code width.
    pub offset_code_dim: usize,
    /// `K`, Gaussians spawned per anchor.
    pub offsets: usize,
    /// `D_z`, appearance latent width.
    pub latent_dim: usize,
}

impl Default for SceneDims {
    fn default() -> Self {
        Self {
            code_dim: 16,
            anchor_code_dim: 32,
            offset_code_dim: 8,
            offsets: 8,
            latent_dim: 16,
        }
    }
}

/// One Code-Gaussian, unpacked from a [`GaussianSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct CodeGaussian {
    pub position: [f32; 3],
    pub rotation: [f32; 4],
    pub log_scale: [f32; 3],
    pub opacity_logit: f32,
    pub code: Vec<f32>,
}

impl CodeGaussian {
    pub fn scale(&self) -> [f64; 3] {
        self.log_scale.map(|v| (v as f64).exp())
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit as f64)
    }
}

/// Structure-of-arrays storage for Code-Gaussians. Every field is a flat
/// `f32` vector so optimizer groups can address it directly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianSet {
    pub code_dim: usize,
    pub positions: Vec<f32>,
    pub rotations: Vec<f32>,
    pub log_scales: Vec<f32>,
    pub opacity_logits: Vec<f32>,
    pub codes: Vec<f32>,
}

impl GaussianSet {
    pub fn new(code_dim: usize) -> Self {
        Self {
            code_dim,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.opacity_logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opacity_logits.is_empty()
    }

    pub fn push(&mut self, g: &CodeGaussian) {
        assert_eq!(g.code.len(), self.code_dim, "code width");
        self.positions.extend_from_slice(&g.position);
        self.rotations.extend_from_slice(&g.rotation);
        self.log_scales.extend_from_slice(&g.log_scale);
        self.opacity_logits.push(g.opacity_logit);
        self.codes.extend_from_slice(&g.code);
    }

    pub fn get(&self, i: usize) -> CodeGaussian {
        CodeGaussian {
            position: self.positions[3 * i..3 * i + 3].try_into().unwrap(),
            rotation: self.rotations[4 * i..4 * i + 4].try_into().unwrap(),
            log_scale: self.log_scales[3 * i..3 * i + 3].try_into().unwrap(),
            opacity_logit: self.opacity_logits[i],
            code: self.code(i).to_vec(),
        }
    }

    pub fn code(&self, i: usize) -> &[f32] {
        &self.codes[i * self.code_dim..(i + 1) * self.code_dim]
    }

    pub(crate) fn validate(&self, what: &str) -> Result<()> {
        let n = self.len();
        let ok = self.positions.len() == 3 * n
            && self.rotations.len() == 4 * n
            && self.log_scales.len() == 3 * n
            && self.codes.len() == n * self.code_dim;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!("{what}: inconsistent array lengths")))
        }
    }
}

/// Background anchors. Positions are fixed after initialization; codes and
/// log-radii are learned.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnchorSet {
    pub code_dim: usize,
    pub offset_code_dim: usize,
    pub offsets: usize,
    pub positions: Vec<f32>,
    pub codes: Vec<f32>,
    pub offset_codes: Vec<f32>,
    pub log_radii: Vec<f32>,
}

impl AnchorSet {
    pub fn new(code_dim: usize, offset_code_dim: usize, offsets: usize) -> Self {
        Self {
            code_dim,
            offset_code_dim,
            offsets,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.log_radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_radii.is_empty()
    }

    pub fn push(&mut self, position: [f32; 3], code: &[f32], offset_codes: &[f32], log_radius: f32) {
        assert_eq!(code.len(), self.code_dim, "anchor code width");
        assert_eq!(offset_codes.len(), self.offsets * self.offset_code_dim, "offset code width");
        self.positions.extend_from_slice(&position);
        self.codes.extend_from_slice(code);
        self.offset_codes.extend_from_slice(offset_codes);
        self.log_radii.push(log_radius);
    }

    pub fn position(&self, i: usize) -> [f32; 3] {
        self.positions[3 * i..3 * i + 3].try_into().unwrap()
    }

    pub fn view(&self, i: usize) -> AnchorView<'_> {
        let ko = self.offsets * self.offset_code_dim;
        AnchorView {
            position: self.position(i),
            code: &self.codes[i * self.code_dim..(i + 1) * self.code_dim],
            offset_codes: &self.offset_codes[i * ko..(i + 1) * ko],
            log_radius: self.log_radii[i],
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.len();
        let ok = self.positions.len() == 3 * n
            && self.codes.len() == n * self.code_dim
            && self.offset_codes.len() == n * self.offsets * self.offset_code_dim;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene("anchors: inconsistent array lengths".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub dims: SceneDims,
    pub bounds: Aabb,
    pub sky: GaussianSet,
    pub ground: GaussianSet,
    pub background: AnchorSet,
    pub sky_decoder: ColorDecoder,
    pub ground_decoder: ColorDecoder,
    pub scaffold: ScaffoldDecoder,
    pub appearance: AppearanceTable,
}

impl Scene {
    /// Checks cross-field consistency: code widths, decoder shapes and
    /// array lengths.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        self.sky.validate("sky")?;
        self.ground.validate("ground")?;
        self.background.validate()?;
        let widths = [
            (self.sky.code_dim, d.code_dim, "sky code width"),
            (self.ground.code_dim, d.code_dim, "ground code width"),
            (self.background.code_dim, d.anchor_code_dim, "anchor code width"),
            (self.background.offset_code_dim, d.offset_code_dim, "offset code width"),
            (self.background.offsets, d.offsets, "offset count"),
            (self.appearance.dim(), d.latent_dim, "latent width"),
            (self.sky_decoder.latent_dim(), d.latent_dim, "sky decoder latent"),
            (self.sky_decoder.code_dim(), d.code_dim, "sky decoder code"),
            (self.ground_decoder.latent_dim(), d.latent_dim, "ground decoder latent"),
            (self.ground_decoder.code_dim(), d.code_dim, "ground decoder code"),
            (self.scaffold.shape().latent_dim, d.latent_dim, "scaffold latent"),
            (self.scaffold.shape().anchor_code_dim, d.anchor_code_dim, "scaffold anchor code"),
            (self.scaffold.shape().offset_code_dim, d.offset_code_dim, "scaffold offset code"),
            (self.scaffold.shape().offsets, d.offsets, "scaffold offsets"),
        ];
        for (got, want, what) in widths {
            if got != want {
                return Err(Error::InvalidScene(format!("{what}: {got} != {want}")));
            }
        }
        if !self.bounds.is_valid() {
            return Err(Error::InvalidScene("bounds".into()));
        }
        Ok(())
    }

    /// Total decoded Gaussians per render: sky + ground + `K` per anchor.
    pub fn splat_count(&self) -> usize {
        self.sky.len() + self.ground.len() + self.background.len() * self.dims.offsets
    }

    /// Latent for traversal `j`, falling back to the default row.
    pub fn latent_for(&self, j: u32) -> Result<Vec<f32>> {
        self.appearance.embed_or_default(j).map(|r| r.to_vec())
    }
}
