use super::Scene;

/// What a parameter group holds; decides its learning rate and any
/// post-update projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Position,
    Rotation,
    Scale,
    Opacity,
    Code,
    Radius,
    Mlp,
    Appearance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: &'static str,
    pub kind: GroupKind,
}

const fn group(name: &'static str, kind: GroupKind) -> ParamGroup {
    ParamGroup { name, kind }
}

/// Fixed order of all trainable tensors in a [`Scene`].
pub const GROUPS: [ParamGroup; 17] = [
    group("sky.position", GroupKind::Position),
    group("sky.rotation", GroupKind::Rotation),
    group("sky.log_scale", GroupKind::Scale),
    group("sky.opacity", GroupKind::Opacity),
    group("sky.code", GroupKind::Code),
    group("ground.position", GroupKind::Position),
    group("ground.rotation", GroupKind::Rotation),
    group("ground.log_scale", GroupKind::Scale),
    group("ground.opacity", GroupKind::Opacity),
    group("ground.code", GroupKind::Code),
    group("anchor.code", GroupKind::Code),
    group("anchor.offset_code", GroupKind::Code),
    group("anchor.log_radius", GroupKind::Radius),
    group("sky_decoder", GroupKind::Mlp),
    group("ground_decoder", GroupKind::Mlp),
    group("scaffold_decoder", GroupKind::Mlp),
    group("appearance", GroupKind::Appearance),
];

pub(crate) const SKY: usize = 0;
pub(crate) const GROUND: usize = 5;
pub(crate) const ANCHOR_CODE: usize = 10;
pub(crate) const OFFSET_CODE: usize = 11;
pub(crate) const LOG_RADIUS: usize = 12;
pub(crate) const SKY_MLP: usize = 13;
pub(crate) const GROUND_MLP: usize = 14;
pub(crate) const SCAFFOLD_MLP: usize = 15;
pub(crate) const APPEARANCE: usize = 16;

impl Scene {
    pub fn param_groups() -> &'static [ParamGroup] {
        &GROUPS
    }

    pub fn group(&self, i: usize) -> &[f32] {
        match i {
            0..=4 => gaussian_field(&self.sky, i - SKY),
            5..=9 => gaussian_field(&self.ground, i - GROUND),
            ANCHOR_CODE => &self.background.codes,
            OFFSET_CODE => &self.background.offset_codes,
            LOG_RADIUS => &self.background.log_radii,
            SKY_MLP => self.sky_decoder.mlp.params(),
            GROUND_MLP => self.ground_decoder.mlp.params(),
            SCAFFOLD_MLP => self.scaffold.mlp.params(),
            APPEARANCE => &self.appearance.rows,
            _ => panic!("parameter group {i} out of range"),
        }
    }

    pub fn group_mut(&mut self, i: usize) -> &mut [f32] {
        match i {
            0..=4 => gaussian_field_mut(&mut self.sky, i - SKY),
            5..=9 => gaussian_field_mut(&mut self.ground, i - GROUND),
            ANCHOR_CODE => &mut self.background.codes,
            OFFSET_CODE => &mut self.background.offset_codes,
            LOG_RADIUS => &mut self.background.log_radii,
            SKY_MLP => self.sky_decoder.mlp.params_mut(),
            GROUND_MLP => self.ground_decoder.mlp.params_mut(),
            SCAFFOLD_MLP => self.scaffold.mlp.params_mut(),
            APPEARANCE => &mut self.appearance.rows,
            _ => panic!("parameter group {i} out of range"),
        }
    }

    pub fn param_count(&self) -> usize {
        (0..GROUPS.len()).map(|i| self.group(i).len()).sum()
    }
}

fn gaussian_field(set: &super::GaussianSet, field: usize) -> &[f32] {
    match field {
        0 => &set.positions,
        1 => &set.rotations,
        2 => &set.log_scales,
        3 => &set.opacity_logits,
        _ => &set.codes,
    }
}

fn gaussian_field_mut(set: &mut super::GaussianSet, field: usize) -> &mut [f32] {
    match field {
        0 => &mut set.positions,
        1 => &mut set.rotations,
        2 => &mut set.log_scales,
        3 => &mut set.opacity_logits,
        _ => &mut set.codes,
    }
}

/// Gradients for every group in [`GROUPS`] order, in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrads {
    pub groups: Vec<Vec<f64>>,
}

impl SceneGrads {
    pub fn zeros_like(scene: &Scene) -> Self {
        Self {
            groups: (0..GROUPS.len()).map(|i| vec![0.0; scene.group(i).len()]).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.groups {
            for v in g.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn add(&mut self, other: &SceneGrads) {
        for (a, b) in self.groups.iter_mut().zip(&other.groups) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.groups.iter().flatten().all(|v| v.is_finite())
    }
}
