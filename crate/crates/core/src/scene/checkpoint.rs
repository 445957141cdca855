//! Binary scene checkpoints. Layout is described in `docs/FORMATS.md`.

use std::io::{Read, Write};
use std::path::Path;

use super::{AnchorSet, AppearanceTable, GaussianSet, Scene, SceneDims};
use crate::decoders::{ColorDecoder, DirEncoding, Mlp, ScaffoldDecoder, ScaffoldShape};
use crate::error::{Error, Result};
use crate::math::Aabb;

pub const MAGIC: &[u8; 4] = b"HWS1";
pub const FORMAT_VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32s(&mut self, what: &'static str, v: &[f32]) -> Result<()> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteParameter(what));
        }
        self.u32(v.len() as u32);
        for x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
        Ok(())
    }
}

struct Reader<'a> {
    data: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.at.checked_add(n).ok_or(Error::UnexpectedEof)?;
        if end > self.data.len() {
            return Err(Error::UnexpectedEof);
        }
        let s = &self.data[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        self.u32().map(|v| v as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self) -> Result<Vec<f32>> {
        let n = self.usize()?;
        let bytes = self.take(n.checked_mul(4).ok_or(Error::UnexpectedEof)?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn write_gaussians(w: &mut Writer, set: &GaussianSet, names: [&'static str; 5]) -> Result<()> {
    w.u32(set.len() as u32);
    w.f32s(names[0], &set.positions)?;
    w.f32s(names[1], &set.rotations)?;
    w.f32s(names[2], &set.log_scales)?;
    w.f32s(names[3], &set.opacity_logits)?;
    w.f32s(names[4], &set.codes)
}

fn read_gaussians(r: &mut Reader, code_dim: usize, what: &str) -> Result<GaussianSet> {
    let n = r.usize()?;
    let set = GaussianSet {
        code_dim,
        positions: r.f32s()?,
        rotations: r.f32s()?,
        log_scales: r.f32s()?,
        opacity_logits: r.f32s()?,
        codes: r.f32s()?,
    };
    if set.len() != n {
        return Err(Error::InvalidScene(format!("{what}: count mismatch")));
    }
    set.validate(what)?;
    Ok(set)
}

fn write_mlp(w: &mut Writer, mlp: &Mlp, encoding: DirEncoding, what: &'static str) -> Result<()> {
    w.u32(encoding.tag());
    w.u32(mlp.dims().len() as u32);
    for d in mlp.dims() {
        w.u32(*d as u32);
    }
    w.f32s(what, mlp.params())
}

fn read_mlp(r: &mut Reader) -> Result<(Mlp, DirEncoding)> {
    let encoding = DirEncoding::from_tag(r.u32()?);
    let layers = r.usize()?;
    if layers < 2 || layers > 64 {
        return Err(Error::InvalidScene(format!("decoder with {layers} layers")));
    }
    let dims = (0..layers).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let params = r.f32s()?;
    Ok((Mlp::from_params(&dims, params)?, encoding))
}

/// Serializes a scene; refuses non-finite parameters.
pub fn write_scene(scene: &Scene, out: &mut impl Write) -> Result<()> {
    scene.validate()?;
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    let d = &scene.dims;
    for v in [d.code_dim, d.anchor_code_dim, d.offset_code_dim, d.offsets, d.latent_dim] {
        w.u32(v as u32);
    }
    for v in scene.bounds.min.iter().chain(&scene.bounds.max) {
        w.f64(*v);
    }
    write_gaussians(
        &mut w,
        &scene.sky,
        ["sky.position", "sky.rotation", "sky.log_scale", "sky.opacity", "sky.code"],
    )?;
    write_gaussians(
        &mut w,
        &scene.ground,
        [
            "ground.position",
            "ground.rotation",
            "ground.log_scale",
            "ground.opacity",
            "ground.code",
        ],
    )?;
    let bg = &scene.background;
    w.u32(bg.len() as u32);
    w.f32s("anchor.position", &bg.positions)?;
    w.f32s("anchor.code", &bg.codes)?;
    w.f32s("anchor.offset_code", &bg.offset_codes)?;
    w.f32s("anchor.log_radius", &bg.log_radii)?;

    write_mlp(&mut w, &scene.sky_decoder.mlp, scene.sky_decoder.encoding, "sky_decoder")?;
    write_mlp(&mut w, &scene.ground_decoder.mlp, scene.ground_decoder.encoding, "ground_decoder")?;
    write_mlp(&mut w, &scene.scaffold.mlp, scene.scaffold.encoding, "scaffold_decoder")?;
    let mut norm = scene.scaffold.position_center.to_vec();
    norm.push(scene.scaffold.position_scale);
    w.f32s("scaffold_decoder", &norm)?;

    let app = &scene.appearance;
    w.u32(app.dim() as u32);
    w.u32(app.len() as u32);
    for id in app.ids() {
        w.u32(*id);
    }
    match app.default_id {
        Some(id) => {
            w.u32(1);
            w.u32(id);
        }
        None => {
            w.u32(0);
            w.u32(0);
        }
    }
    w.f32s("appearance", &app.rows)?;
    out.write_all(&w.buf)
        .map_err(|e| Error::io("<stream>", e))
}

pub fn read_scene(input: &mut impl Read) -> Result<Scene> {
    let mut data = Vec::new();
    input
        .read_to_end(&mut data)
        .map_err(|e| Error::io("<stream>", e))?;
    parse(&data)
}

fn parse(data: &[u8]) -> Result<Scene> {
    let mut r = Reader { data, at: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::NotASceneFile);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dims = SceneDims {
        code_dim: r.usize()?,
        anchor_code_dim: r.usize()?,
        offset_code_dim: r.usize()?,
        offsets: r.usize()?,
        latent_dim: r.usize()?,
    };
    let mut b = [0.0; 6];
    for v in &mut b {
        *v = r.f64()?;
    }
    let bounds = Aabb::new([b[0], b[1], b[2]], [b[3], b[4], b[5]]);
    let sky = read_gaussians(&mut r, dims.code_dim, "sky")?;
    let ground = read_gaussians(&mut r, dims.code_dim, "ground")?;
    let n_anchor = r.usize()?;
    let background = AnchorSet {
        code_dim: dims.anchor_code_dim,
        offset_code_dim: dims.offset_code_dim,
        offsets: dims.offsets,
        positions: r.f32s()?,
        codes: r.f32s()?,
        offset_codes: r.f32s()?,
        log_radii: r.f32s()?,
    };
    if background.len() != n_anchor {
        return Err(Error::InvalidScene("anchors: count mismatch".into()));
    }
    background.validate()?;

    let (sky_mlp, sky_enc) = read_mlp(&mut r)?;
    let (ground_mlp, ground_enc) = read_mlp(&mut r)?;
    let (scaffold_mlp, scaffold_enc) = read_mlp(&mut r)?;
    let norm = r.f32s()?;
    if norm.len() != 4 {
        return Err(Error::InvalidScene("scaffold normalization".into()));
    }
    let sky_decoder = ColorDecoder::from_mlp(sky_mlp, sky_enc, dims.latent_dim, dims.code_dim)?;
    let ground_decoder = ColorDecoder::from_mlp(ground_mlp, ground_enc, dims.latent_dim, dims.code_dim)?;
    let scaffold = ScaffoldDecoder::from_parts(
        scaffold_mlp,
        scaffold_enc,
        ScaffoldShape {
            latent_dim: dims.latent_dim,
            anchor_code_dim: dims.anchor_code_dim,
            offset_code_dim: dims.offset_code_dim,
            offsets: dims.offsets,
        },
        [norm[0], norm[1], norm[2]],
        norm[3],
    )?;

    let dim = r.usize()?;
    let rows = r.usize()?;
    let ids = (0..rows).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let has_default = r.u32()?;
    let default_raw = r.u32()?;
    let values = r.f32s()?;
    let appearance = AppearanceTable::from_parts(dim, ids, values, (has_default != 0).then_some(default_raw))?;
    if r.at != data.len() {
        return Err(Error::InvalidScene("trailing bytes".into()));
    }

    let scene = Scene {
        dims,
        bounds,
        sky,
        ground,
        background,
        sky_decoder,
        ground_decoder,
        scaffold,
        appearance,
    };
    scene.validate()?;
    Ok(scene)
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_scene(scene, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse(&data)
}
