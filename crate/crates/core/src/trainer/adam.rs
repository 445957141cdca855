use crate::math::normalize_quat;
use crate::scene::{GroupKind, Scene, SceneGrads};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-15;

/// Adam moments for a list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
    /// Tensors whose update was skipped because of a non-finite gradient.
    pub skipped: u64,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            m: sizes.iter().map(|n| vec![0.0; *n]).collect(),
            v: sizes.iter().map(|n| vec![0.0; *n]).collect(),
            step: 0,
            skipped: 0,
        }
    }

    pub fn for_scene(scene: &Scene) -> Self {
        let sizes: Vec<usize> = (0..Scene::param_groups().len()).map(|i| scene.group(i).len()).collect();
        Self::new(&sizes)
    }

    fn begin(&mut self) -> (f64, f64) {
        self.step += 1;
        let t = self.step as i32;
        (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t))
    }

    /// Bias-corrected update of tensor `i`. Entries where `active` is false
    /// keep both parameter and moments untouched.
    fn update(
        &mut self,
        i: usize,
        params: &mut [f32],
        grad: &[f64],
        lr: f64,
        corr: (f64, f64),
        active: impl Fn(usize) -> bool,
    ) -> bool {
        if grad.iter().any(|g| !g.is_finite()) {
            self.skipped += 1;
            return false;
        }
        let (m, v) = (&mut self.m[i], &mut self.v[i]);
        for k in 0..params.len() {
            if !active(k) {
                continue;
            }
            let g = grad[k];
            m[k] = BETA1 * m[k] + (1.0 - BETA1) * g;
            v[k] = BETA2 * v[k] + (1.0 - BETA2) * g * g;
            let mh = m[k] / corr.0;
            let vh = v[k] / corr.1;
            params[k] = (params[k] as f64 - lr * mh / (vh.sqrt() + EPSILON)) as f32;
        }
        true
    }

    /// One Adam step over plain tensors.
    pub fn step_tensors(&mut self, params: &mut [&mut [f32]], grads: &[Vec<f64>], lrs: &[f64]) {
        let corr = self.begin();
        for (i, p) in params.iter_mut().enumerate() {
            self.update(i, p, &grads[i], lrs[i], corr, |_| true);
        }
    }
}

/// Adam step over every scene group, then quaternion renormalization.
/// Appearance rows with an all-zero gradient are left untouched so a
/// traversal's latent only moves when that traversal is observed.
pub fn adam_step(scene: &mut Scene, grads: &SceneGrads, state: &mut AdamState, lrs: &[f64]) {
    let corr = state.begin();
    let dz = scene.dims.latent_dim.max(1);
    for (i, group) in Scene::param_groups().iter().enumerate() {
        let grad = &grads.groups[i];
        let params = scene.group_mut(i);
        let updated = if group.kind == GroupKind::Appearance {
            let live: Vec<bool> = grad.chunks(dz).map(|r| r.iter().any(|g| *g != 0.0)).collect();
            state.update(i, params, grad, lrs[i], corr, |k| live[k / dz])
        } else {
            state.update(i, params, grad, lrs[i], corr, |_| true)
        };
        if updated && group.kind == GroupKind::Rotation {
            for q in params.chunks_mut(4) {
                let (u, n) = normalize_quat([q[0] as f64, q[1] as f64, q[2] as f64, q[3] as f64]);
                if n > 0.0 {
                    for k in 0..4 {
                        q[k] = u[k] as f32;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0f32, -2.0, 3.0];
        let mut st = AdamState::new(&[3]);
        st.step_tensors(&mut [&mut p], &[vec![0.0; 3]], &[0.1]);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn constant_gradient_moves_by_lr() {
        let mut p = vec![0.0f32; 2];
        let mut st = AdamState::new(&[2]);
        for _ in 0..50 {
            let before = p.clone();
            st.step_tensors(&mut [&mut p], &[vec![3.0, -0.5]], &[1e-3]);
            assert!(((before[0] - p[0]) as f64 - 1e-3).abs() < 1e-6);
            assert!(((p[1] - before[1]) as f64 - 1e-3).abs() < 1e-6);
        }
    }

    #[test]
    fn nan_gradient_skips_tensor() {
        let mut a = vec![1.0f32];
        let mut b = vec![1.0f32];
        let mut st = AdamState::new(&[1, 1]);
        st.step_tensors(&mut [&mut a, &mut b], &[vec![f64::NAN], vec![1.0]], &[0.1, 0.1]);
        assert_eq!(a, vec![1.0]);
        assert!(b[0] < 1.0);
        assert_eq!(st.skipped, 1);
    }
}
