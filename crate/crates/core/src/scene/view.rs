//! Decoding a scene into renderable splats for one camera, and the adjoint
//! that routes splat gradients back to scene parameters.

use std::ops::Range;

use super::params::{
    SceneGrads, ANCHOR_CODE, GROUND, GROUND_MLP, LOG_RADIUS, OFFSET_CODE, SCAFFOLD_MLP, SKY, SKY_MLP,
};
use super::{GaussianSet, Scene};
use crate::decoders::{
    direction_backward, AnchorView, ColorBatch, ColorDecoder, DecodedOffsetGrad, ScaffoldBatch,
};
use crate::error::{Error, Result};
use crate::math::{sigmoid, Vec3};
use crate::rasterizer::{CameraFrame, Splat, SplatGrad};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Sky,
    Ground,
    Background,
}

struct CodeNodes {
    batch: ColorBatch,
    dirs: Vec<Vec3>,
    dists: Vec<f64>,
}

/// Splats for one camera plus everything needed to differentiate them.
pub struct DecodedView {
    pub splats: Vec<Splat>,
    sky: CodeNodes,
    ground: CodeNodes,
    scaffold: ScaffoldBatch,
    counts: [usize; 3],
}

impl DecodedView {
    pub fn range(&self, kind: NodeKind) -> Range<usize> {
        let [s, g, b] = self.counts;
        match kind {
            NodeKind::Sky => 0..s,
            NodeKind::Ground => s..s + g,
            NodeKind::Background => s + g..s + g + b,
        }
    }

    pub fn kind_of(&self, index: usize) -> NodeKind {
        let [s, g, _] = self.counts;
        if index < s {
            NodeKind::Sky
        } else if index < s + g {
            NodeKind::Ground
        } else {
            NodeKind::Background
        }
    }
}

/// Gradients of a render loss with respect to scene parameters and to the
/// latent used for the view.
#[derive(Debug, Clone)]
pub struct ViewGrads {
    pub scene: SceneGrads,
    pub latent: Vec<f64>,
}

fn decode_codes(
    set: &GaussianSet,
    decoder: &ColorDecoder,
    center: &Vec3,
    z: &[f32],
    sky: bool,
    out: &mut Vec<Splat>,
) -> Result<CodeNodes> {
    let n = set.len();
    let mut dirs = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n);
    for i in 0..n {
        let p = &set.positions[3 * i..3 * i + 3];
        let v = Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64) - center;
        let dist = v.norm().max(1e-12);
        dirs.push(v / dist);
        dists.push(dist);
    }
    let batch = decoder.forward_batch(&dirs, z, &set.codes)?;
    for i in 0..n {
        let p = &set.positions[3 * i..3 * i + 3];
        let q = &set.rotations[4 * i..4 * i + 4];
        let s = &set.log_scales[3 * i..3 * i + 3];
        out.push(Splat {
            position: Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64),
            rotation: [q[0] as f64, q[1] as f64, q[2] as f64, q[3] as f64],
            scale: Vec3::new((s[0] as f64).exp(), (s[1] as f64).exp(), (s[2] as f64).exp()),
            opacity: sigmoid(set.opacity_logits[i] as f64),
            color: batch.colors[i],
            sky,
        });
    }
    Ok(CodeNodes { batch, dirs, dists })
}

/// Decodes every node of `scene` for `cam` under latent `z`. Splats are
/// ordered sky, ground, then background (anchor-major, `K` per anchor).
pub fn decode_view(scene: &Scene, cam: &CameraFrame, z: &[f32]) -> Result<DecodedView> {
    let center = cam.center();
    let mut splats = Vec::with_capacity(scene.splat_count());
    let sky = decode_codes(&scene.sky, &scene.sky_decoder, &center, z, true, &mut splats)?;
    let ground = decode_codes(&scene.ground, &scene.ground_decoder, &center, z, false, &mut splats)?;

    let bg = &scene.background;
    let anchors: Vec<AnchorView> = (0..bg.len()).map(|i| bg.view(i)).collect();
    let dirs: Vec<Vec3> = anchors
        .iter()
        .map(|a| {
            let p = Vec3::new(a.position[0] as f64, a.position[1] as f64, a.position[2] as f64);
            (p - center).try_normalize(1e-12).unwrap_or(Vec3::z())
        })
        .collect();
    let scaffold = scene.scaffold.forward_batch(z, &anchors, &dirs)?;
    for d in &scaffold.decoded {
        splats.push(Splat {
            position: d.position,
            rotation: d.rotation,
            scale: d.scale,
            opacity: d.opacity,
            color: d.color,
            sky: false,
        });
    }
    let counts = [scene.sky.len(), scene.ground.len(), scaffold.decoded.len()];
    Ok(DecodedView {
        splats,
        sky,
        ground,
        scaffold,
        counts,
    })
}

fn backward_codes(
    set: &GaussianSet,
    decoder: &ColorDecoder,
    nodes: &CodeNodes,
    splats: &[Splat],
    grads: &[SplatGrad],
    with_params: bool,
    out: &mut [Vec<f64>],
    mlp_out: &mut Vec<f64>,
    latent: &mut [f64],
) -> Result<()> {
    let g_colors: Vec<[f64; 3]> = grads.iter().map(|g| g.color).collect();
    let cg = decoder.backward_batch(&nodes.batch, &nodes.dirs, &g_colors, with_params)?;
    let [pos, rot, scale, opa, code] = out else {
        unreachable!("five gaussian groups")
    };
    for (i, g) in grads.iter().enumerate() {
        let gp = g.position + direction_backward(&nodes.dirs[i], nodes.dists[i], &cg.dirs[i]);
        for c in 0..3 {
            pos[3 * i + c] = gp[c];
            scale[3 * i + c] = g.scale[c] * splats[i].scale[c];
        }
        rot[4 * i..4 * i + 4].copy_from_slice(&g.rotation);
        let a = splats[i].opacity;
        opa[i] = g.opacity * a * (1.0 - a);
    }
    code.copy_from_slice(&cg.codes);
    debug_assert_eq!(code.len(), set.codes.len());
    for (l, v) in latent.iter_mut().zip(&cg.latent) {
        *l += v;
    }
    if let Some(p) = cg.params {
        *mlp_out = p;
    }
    Ok(())
}

/// Routes per-splat gradients (from `render_backward`) to scene parameters
/// and the latent. With `with_params == false` decoder weight gradients are
/// left at zero.
pub fn backward_view(
    scene: &Scene,
    view: &DecodedView,
    grads: &[SplatGrad],
    with_params: bool,
) -> Result<ViewGrads> {
    if grads.len() != view.splats.len() || view.splats.len() != scene.splat_count() {
        return Err(Error::GradientContextMismatch);
    }
    let mut out = SceneGrads::zeros_like(scene);
    let mut latent = vec![0.0; scene.dims.latent_dim];

    let r = view.range(NodeKind::Sky);
    let (head, tail) = out.groups.split_at_mut(SKY_MLP);
    backward_codes(
        &scene.sky,
        &scene.sky_decoder,
        &view.sky,
        &view.splats[r.clone()],
        &grads[r],
        with_params,
        &mut head[SKY..SKY + 5],
        &mut tail[0],
        &mut latent,
    )?;
    let r = view.range(NodeKind::Ground);
    backward_codes(
        &scene.ground,
        &scene.ground_decoder,
        &view.ground,
        &view.splats[r.clone()],
        &grads[r],
        with_params,
        &mut head[GROUND..GROUND + 5],
        &mut tail[GROUND_MLP - SKY_MLP],
        &mut latent,
    )?;

    let r = view.range(NodeKind::Background);
    let offs: Vec<DecodedOffsetGrad> = grads[r]
        .iter()
        .map(|g| DecodedOffsetGrad {
            position: g.position,
            rotation: g.rotation,
            scale: g.scale,
            opacity: g.opacity,
            color: g.color,
        })
        .collect();
    let sg = scene.scaffold.backward_batch(&view.scaffold, &offs, with_params)?;
    out.groups[ANCHOR_CODE] = sg.anchor_codes;
    out.groups[OFFSET_CODE] = sg.offset_codes;
    out.groups[LOG_RADIUS] = sg.log_radii;
    if let Some(p) = sg.params {
        out.groups[SCAFFOLD_MLP] = p;
    }
    for (l, v) in latent.iter_mut().zip(&sg.latent) {
        *l += v;
    }
    Ok(ViewGrads { scene: out, latent })
}
