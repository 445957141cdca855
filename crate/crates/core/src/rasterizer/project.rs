//! EWA projection of 3D Gaussians onto the image plane and its adjoint.

use nalgebra::{Matrix2, Matrix2x3, Matrix3x2};

use super::camera::CameraFrame;
use super::RenderSettings;
use crate::math::{
    normalize_quat, normalize_quat_backward, quat_to_matrix, quat_to_matrix_backward, Mat3, Vec3,
};

/// A fully decoded Gaussian ready for rasterization.
///
/// `rotation` need not be unit length; it is normalized during projection and
/// gradients are taken with respect to the raw value.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat {
    pub position: Vec3,
    pub rotation: [f64; 4],
    pub scale: Vec3,
    pub opacity: f64,
    pub color: [f64; 3],
    /// Sky splats occlude like any other splat but are reported in the
    /// separate sky-coverage channel so geometric losses can skip them.
    pub sky: bool,
}

impl Splat {
    pub fn isotropic(position: Vec3, scale: f64, opacity: f64, color: [f64; 3]) -> Self {
        Self {
            position,
            rotation: crate::math::IDENTITY_QUAT,
            scale: Vec3::repeat(scale),
            opacity,
            color,
            sky: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplatGrad {
    pub position: Vec3,
    pub rotation: [f64; 4],
    pub scale: Vec3,
    pub opacity: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenGaussian {
    /// Pixel coordinates of the projected center.
    pub mean: [f64; 2],
    /// Screen covariance `[xx, xy, yy]` in px², including the low-pass floor.
    pub cov: [f64; 3],
    /// Inverse of `cov`, `[xx, xy, yy]`.
    pub conic: [f64; 3],
    /// View-space depth (meters).
    pub depth: f64,
    pub opacity: f64,
    pub color: [f64; 3],
    /// Unit normal in camera coordinates, facing the camera.
    pub normal: Vec3,
    /// Half-extent in pixels of the truncated footprint.
    pub extent: [f64; 2],
    pub source: usize,
    pub sky: bool,
}

/// Gradient with respect to the screen-space quantities of one splat.
/// `conic` holds the symmetric full-matrix gradient `[gxx, gxy, gyy]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScreenGrad {
    pub mean: [f64; 2],
    pub conic: [f64; 3],
    pub depth: f64,
    pub opacity: f64,
    pub color: [f64; 3],
    pub normal: Vec3,
}

impl ScreenGrad {
    pub(crate) fn add(&mut self, o: &ScreenGrad) {
        self.mean[0] += o.mean[0];
        self.mean[1] += o.mean[1];
        for i in 0..3 {
            self.conic[i] += o.conic[i];
            self.color[i] += o.color[i];
        }
        self.depth += o.depth;
        self.opacity += o.opacity;
        self.normal += o.normal;
    }
}

struct Terms {
    cam_from_world: Mat3,
    p_cam: Vec3,
    q_unit: [f64; 4],
    q_norm: f64,
    rot: Mat3,
    m: Mat3,
    cov_cam: Mat3,
    jac: Matrix2x3<f64>,
    cov2d: Matrix2<f64>,
    normal_axis: usize,
    normal_sign: f64,
}

fn terms(splat: &Splat, cam: &CameraFrame, cam_from_world: &Mat3) -> Terms {
    let k = &cam.intrinsics;
    let p_cam = cam_from_world * (splat.position - cam.translation);
    let (q_unit, q_norm) = normalize_quat(splat.rotation);
    let rot = quat_to_matrix(q_unit);
    let s = &splat.scale;
    let m = Mat3::from_columns(&[rot.column(0) * s.x, rot.column(1) * s.y, rot.column(2) * s.z]);
    let cov_world = m * m.transpose();
    let cov_cam = cam_from_world * cov_world * cam_from_world.transpose();
    let (x, y, z) = (p_cam.x, p_cam.y, p_cam.z);
    let jac = Matrix2x3::new(
        k.fx / z,
        0.0,
        -k.fx * x / (z * z),
        0.0,
        k.fy / z,
        -k.fy * y / (z * z),
    );
    let cov2d = jac * cov_cam * jac.transpose();

    let mut normal_axis = 0;
    for i in 1..3 {
        if s[i] < s[normal_axis] {
            normal_axis = i;
        }
    }
    let n_cam = cam_from_world * rot.column(normal_axis);
    let normal_sign = if n_cam.dot(&p_cam) > 0.0 { -1.0 } else { 1.0 };

    Terms {
        cam_from_world: *cam_from_world,
        p_cam,
        q_unit,
        q_norm,
        rot,
        m,
        cov_cam,
        jac,
        cov2d,
        normal_axis,
        normal_sign,
    }
}

/// `J Σ Jᵀ` without the low-pass floor, as `[xx, xy, yy]`.
pub fn projected_covariance(splat: &Splat, cam: &CameraFrame) -> [f64; 3] {
    let t = terms(splat, cam, &cam.camera_from_world());
    [t.cov2d[(0, 0)], t.cov2d[(0, 1)], t.cov2d[(1, 1)]]
}

fn is_culled(p_cam: &Vec3, cam: &CameraFrame, settings: &RenderSettings) -> bool {
    let k = &cam.intrinsics;
    if !(p_cam.z > settings.near) {
        return true;
    }
    let xn = p_cam.x / p_cam.z;
    let yn = p_cam.y / p_cam.z;
    let g = settings.guard_band;
    xn < -g * k.cx / k.fx
        || xn > g * (k.width as f64 - k.cx) / k.fx
        || yn < -g * k.cy / k.fy
        || yn > g * (k.height as f64 - k.cy) / k.fy
}

/// Projects one splat. Returns `None` when the splat is culled (behind the
/// near plane, outside the guard band, or numerically degenerate).
pub fn project_gaussian(
    splat: &Splat,
    cam: &CameraFrame,
    settings: &RenderSettings,
) -> Option<ScreenGaussian> {
    project_with(splat, cam, &cam.camera_from_world(), settings, 0)
}

pub(crate) fn project_with(
    splat: &Splat,
    cam: &CameraFrame,
    cam_from_world: &Mat3,
    settings: &RenderSettings,
    source: usize,
) -> Option<ScreenGaussian> {
    let p_cam = cam_from_world * (splat.position - cam.translation);
    if is_culled(&p_cam, cam, settings) {
        return None;
    }
    let t = terms(splat, cam, cam_from_world);
    let k = &cam.intrinsics;
    let a = t.cov2d[(0, 0)] + settings.low_pass;
    let b = t.cov2d[(0, 1)];
    let c = t.cov2d[(1, 1)] + settings.low_pass;
    let det = a * c - b * b;
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let mean = [
        k.fx * t.p_cam.x / t.p_cam.z + k.cx,
        k.fy * t.p_cam.y / t.p_cam.z + k.cy,
    ];
    let normal = t.cam_from_world * t.rot.column(t.normal_axis) * t.normal_sign;
    Some(ScreenGaussian {
        mean,
        cov: [a, b, c],
        conic: [c / det, -b / det, a / det],
        depth: t.p_cam.z,
        opacity: splat.opacity,
        color: splat.color,
        normal,
        extent: [
            settings.cutoff_sigma * a.sqrt(),
            settings.cutoff_sigma * c.sqrt(),
        ],
        source,
        sky: splat.sky,
    })
}

/// Adjoint of [`project_gaussian`]: maps screen-space gradients back onto the
/// splat's world-space parameters.
pub fn project_backward(
    splat: &Splat,
    cam: &CameraFrame,
    screen: &ScreenGaussian,
    g: &ScreenGrad,
) -> SplatGrad {
    let cam_from_world = cam.camera_from_world();
    project_backward_with(splat, cam, &cam_from_world, screen, g)
}

pub(crate) fn project_backward_with(
    splat: &Splat,
    cam: &CameraFrame,
    cam_from_world: &Mat3,
    screen: &ScreenGaussian,
    g: &ScreenGrad,
) -> SplatGrad {
    let t = terms(splat, cam, cam_from_world);
    let k = &cam.intrinsics;
    let (x, y, z) = (t.p_cam.x, t.p_cam.y, t.p_cam.z);

    // conic -> covariance: dL/dΣ = -Q G_Q Q
    let q = Matrix2::new(screen.conic[0], screen.conic[1], screen.conic[1], screen.conic[2]);
    let gq = Matrix2::new(g.conic[0], g.conic[1], g.conic[1], g.conic[2]);
    let g_cov2d = -(q * gq * q);

    // Σ2 = J Σc Jᵀ
    let jt: Matrix3x2<f64> = t.jac.transpose();
    let g_cov_cam = jt * g_cov2d * t.jac;
    let g_jac = 2.0 * g_cov2d * t.jac * t.cov_cam;

    // Σc = W Σ3 Wᵀ, Σ3 = M Mᵀ, M = R S
    let w = &t.cam_from_world;
    let g_cov_world = w.transpose() * g_cov_cam * w;
    let g_m = 2.0 * g_cov_world * t.m;
    let s = &splat.scale;
    let mut g_scale = Vec3::zeros();
    let mut g_rot = Mat3::zeros();
    for j in 0..3 {
        for i in 0..3 {
            g_scale[j] += g_m[(i, j)] * t.rot[(i, j)];
            g_rot[(i, j)] += g_m[(i, j)] * s[j];
        }
    }
    // normal = sign * W * R[:, axis]
    let g_axis = w.transpose() * g.normal * t.normal_sign;
    for i in 0..3 {
        g_rot[(i, t.normal_axis)] += g_axis[i];
    }
    let g_q_unit = quat_to_matrix_backward(t.q_unit, &g_rot);
    let g_rotation = normalize_quat_backward(t.q_unit, t.q_norm, g_q_unit);

    // camera-space position
    let z2 = z * z;
    let z3 = z2 * z;
    let mut g_p = Vec3::zeros();
    g_p.x += g.mean[0] * k.fx / z;
    g_p.y += g.mean[1] * k.fy / z;
    g_p.z += -g.mean[0] * k.fx * x / z2 - g.mean[1] * k.fy * y / z2;
    g_p.z += g.depth;
    g_p.x += g_jac[(0, 2)] * (-k.fx / z2);
    g_p.y += g_jac[(1, 2)] * (-k.fy / z2);
    g_p.z += g_jac[(0, 0)] * (-k.fx / z2)
        + g_jac[(0, 2)] * (2.0 * k.fx * x / z3)
        + g_jac[(1, 1)] * (-k.fy / z2)
        + g_jac[(1, 2)] * (2.0 * k.fy * y / z3);

    SplatGrad {
        position: w.transpose() * g_p,
        rotation: g_rotation,
        scale: g_scale,
        opacity: g.opacity,
        color: g.color,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rasterizer::camera::Intrinsics;

    fn cam() -> CameraFrame {
        CameraFrame::new(
            Intrinsics {
                fx: 100.0,
                fy: 100.0,
                cx: 50.0,
                cy: 50.0,
                width: 100,
                height: 100,
            },
            [1.0, 0.0, 0.0, 0.0],
            Vec3::zeros(),
        )
    }

    #[test]
    fn optical_axis_point() {
        let s = Splat::isotropic(Vec3::new(0.0, 0.0, 5.0), 0.1, 0.5, [1.0, 0.0, 0.0]);
        let sg = project_gaussian(&s, &cam(), &RenderSettings::default()).unwrap();
        assert_eq!(sg.mean, [50.0, 50.0]);
        assert_eq!(sg.depth, 5.0);
    }

    #[test]
    fn isotropic_covariance_by_hand() {
        // (fx * s / z)^2 = (100 * 0.1 / 5)^2 = 4 px² on the optical axis
        let s = Splat::isotropic(Vec3::new(0.0, 0.0, 5.0), 0.1, 0.5, [1.0, 0.0, 0.0]);
        let cov = projected_covariance(&s, &cam());
        assert!((cov[0] - 4.0).abs() < 1e-12);
        assert!(cov[1].abs() < 1e-12);
        assert!((cov[2] - 4.0).abs() < 1e-12);
        let sg = project_gaussian(&s, &cam(), &RenderSettings::default()).unwrap();
        assert!((sg.cov[0] - 4.3).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_culled() {
        let s = Splat::isotropic(Vec3::new(0.0, 0.0, -1.0), 0.1, 0.5, [1.0, 0.0, 0.0]);
        assert!(project_gaussian(&s, &cam(), &RenderSettings::default()).is_none());
        // far outside the guard band
        let s = Splat::isotropic(Vec3::new(10.0, 0.0, 5.0), 0.1, 0.5, [1.0, 0.0, 0.0]);
        assert!(project_gaussian(&s, &cam(), &RenderSettings::default()).is_none());
    }

    #[test]
    fn normal_faces_camera() {
        let mut s = Splat::isotropic(Vec3::new(0.3, -0.2, 4.0), 0.2, 0.5, [1.0, 0.0, 0.0]);
        s.scale = Vec3::new(0.2, 0.2, 0.01);
        let sg = project_gaussian(&s, &cam(), &RenderSettings::default()).unwrap();
        assert!((sg.normal.norm() - 1.0).abs() < 1e-12);
        assert!(sg.normal.dot(&Vec3::new(0.3, -0.2, 4.0)) < 0.0);
    }
}
