use crate::error::{Error, Result};
use crate::math::{normalize_quat, quat_to_matrix, Mat3, Vec3};

/// Pinhole intrinsics in pixels. Pixel `(i, j)` has its center at `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// A posed camera observing one frame of one traversal.
///
/// Camera axes follow the usual vision convention: +x right, +y down,
/// +z forward. The pose maps camera coordinates into the world.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub intrinsics: Intrinsics,
    /// World-from-camera rotation, `[w, x, y, z]`.
    pub rotation: [f64; 4],
    /// Camera center in world coordinates (meters).
    pub translation: Vec3,
    pub traversal: u32,
    pub timestamp: f64,
}

impl CameraFrame {
    pub fn new(intrinsics: Intrinsics, rotation: [f64; 4], translation: Vec3) -> Self {
        Self {
            intrinsics,
            rotation: normalize_quat(rotation).0,
            translation,
            traversal: 0,
            timestamp: 0.0,
        }
    }

    pub fn with_traversal(mut self, traversal: u32, timestamp: f64) -> Self {
        self.traversal = traversal;
        self.timestamp = timestamp;
        self
    }

    /// Camera whose optical axis is `forward` with image-down roughly along
    /// world `-up`.
    pub fn looking_at(intrinsics: Intrinsics, eye: Vec3, target: Vec3, up: Vec3) -> Self {
        let z = (target - eye).normalize();
        let x = z.cross(&up).normalize();
        let y = z.cross(&x);
        let m = Mat3::from_columns(&[x, y, z]);
        Self::new(intrinsics, crate::math::matrix_to_quat(&m), eye)
    }

    pub fn validate(&self) -> Result<()> {
        let k = &self.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0 && k.fx.is_finite() && k.fy.is_finite()) {
            return Err(Error::InvalidCamera(format!(
                "invalid intrinsics: fx={} fy={}",
                k.fx, k.fy
            )));
        }
        if k.width == 0 || k.height == 0 {
            return Err(Error::InvalidCamera("invalid intrinsics: empty image".into()));
        }
        if !(k.cx >= 0.0 && k.cx < k.width as f64 && k.cy >= 0.0 && k.cy < k.height as f64) {
            return Err(Error::InvalidCamera(format!(
                "invalid intrinsics: principal point ({}, {}) outside {}x{}",
                k.cx, k.cy, k.width, k.height
            )));
        }
        let n = crate::math::quat_norm(self.rotation);
        if (n - 1.0).abs() > 1e-6 || !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCamera("pose is not a rigid transform".into()));
        }
        Ok(())
    }

    pub fn world_from_camera(&self) -> Mat3 {
        quat_to_matrix(self.rotation)
    }

    pub fn camera_from_world(&self) -> Mat3 {
        self.world_from_camera().transpose()
    }

    pub fn center(&self) -> Vec3 {
        self.translation
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.camera_from_world() * (p - self.translation)
    }

    /// Projects a world point; `None` when it is not in front of the camera.
    pub fn project(&self, p: &Vec3) -> Option<([f64; 2], f64)> {
        let c = self.to_camera(p);
        if c.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        Some(([k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy], c.z))
    }

    /// Unit world-space ray direction through pixel coordinates `(u, v)`.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vec3 {
        let k = &self.intrinsics;
        let d = Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        (self.world_from_camera() * d).normalize()
    }

    /// Same camera with intrinsics divided by an integer factor.
    pub fn downscaled(&self, factor: usize) -> Self {
        if factor <= 1 {
            return self.clone();
        }
        let f = factor as f64;
        let k = &self.intrinsics;
        let mut out = self.clone();
        out.intrinsics = Intrinsics {
            fx: k.fx / f,
            fy: k.fy / f,
            // downscaled pixel x averages source pixels fx..fx+f-1
            cx: (k.cx - 0.5 * (f - 1.0)) / f,
            cy: (k.cy - 0.5 * (f - 1.0)) / f,
            width: (k.width / factor).max(1),
            height: (k.height / factor).max(1),
        };
        out
    }
}
