//! Small geometry helpers shared by the rasterizer, decoders and initializer.
//!
//! Quaternions are plain `[w, x, y, z]` arrays. Everything here works in `f64`;
//! stored parameters are `f32` and are widened at the point of use.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

pub const IDENTITY_QUAT: [f64; 4] = [1.0, 0.0, 0.0, 0.0];

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn vec3_from_f32(v: &[f32]) -> Vec3 {
    Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64)
}

pub fn quat_norm(q: [f64; 4]) -> f64 {
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
}

/// Returns the unit quaternion and the original norm. A zero quaternion maps
/// to identity.
pub fn normalize_quat(q: [f64; 4]) -> ([f64; 4], f64) {
    let n = quat_norm(q);
    if n < 1e-30 {
        return (IDENTITY_QUAT, 0.0);
    }
    ([q[0] / n, q[1] / n, q[2] / n, q[3] / n], n)
}

/// Pulls a gradient on the unit quaternion back to the raw one.
pub fn normalize_quat_backward(unit: [f64; 4], norm: f64, grad_unit: [f64; 4]) -> [f64; 4] {
    if norm < 1e-30 {
        return [0.0; 4];
    }
    let dot: f64 = (0..4).map(|i| unit[i] * grad_unit[i]).sum();
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = (grad_unit[i] - unit[i] * dot) / norm;
    }
    out
}

/// Rotation matrix of a unit quaternion.
pub fn quat_to_matrix(q: [f64; 4]) -> Mat3 {
    let [w, x, y, z] = q;
    Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Gradient of a scalar through `quat_to_matrix`, treating the matrix entries
/// as polynomials in the (not renormalized) quaternion components.
pub fn quat_to_matrix_backward(q: [f64; 4], g: &Mat3) -> [f64; 4] {
    let [w, x, y, z] = q;
    let gw = 2.0 * (-z * g[(0, 1)] + y * g[(0, 2)] + z * g[(1, 0)] - x * g[(1, 2)] - y * g[(2, 0)]
        + x * g[(2, 1)]);
    let gx = 2.0 * (y * g[(0, 1)] + z * g[(0, 2)] + y * g[(1, 0)] - 2.0 * x * g[(1, 1)]
        - w * g[(1, 2)]
        + z * g[(2, 0)]
        + w * g[(2, 1)]
        - 2.0 * x * g[(2, 2)]);
    let gy = 2.0 * (-2.0 * y * g[(0, 0)] + x * g[(0, 1)] + w * g[(0, 2)] + x * g[(1, 0)]
        + z * g[(1, 2)]
        - w * g[(2, 0)]
        + z * g[(2, 1)]
        - 2.0 * y * g[(2, 2)]);
    let gz = 2.0 * (-2.0 * z * g[(0, 0)] - w * g[(0, 1)] + x * g[(0, 2)] + w * g[(1, 0)]
        - 2.0 * z * g[(1, 1)]
        + y * g[(1, 2)]
        + x * g[(2, 0)]
        + y * g[(2, 1)]);
    [gw, gx, gy, gz]
}

/// Unit quaternion of a proper rotation matrix (Shepperd's method).
pub fn matrix_to_quat(m: &Mat3) -> [f64; 4] {
    let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let q = if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        [
            0.25 * s,
            (m[(2, 1)] - m[(1, 2)]) / s,
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(1, 0)] - m[(0, 1)]) / s,
        ]
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        [
            (m[(2, 1)] - m[(1, 2)]) / s,
            0.25 * s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
        ]
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
        [
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            0.25 * s,
            (m[(1, 2)] + m[(2, 1)]) / s,
        ]
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
        [
            (m[(1, 0)] - m[(0, 1)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
            (m[(1, 2)] + m[(2, 1)]) / s,
            0.25 * s,
        ]
    };
    let (q, _) = normalize_quat(q);
    if q[0] < 0.0 {
        [-q[0], -q[1], -q[2], -q[3]]
    } else {
        q
    }
}

/// Shortest-arc rotation taking the local +z axis onto `n`.
pub fn quat_from_z_axis(n: &Vec3) -> [f64; 4] {
    let n = n.normalize();
    let z = Vec3::z();
    let d = z.dot(&n);
    if d < -1.0 + 1e-12 {
        // 180 degrees about x
        return [0.0, 1.0, 0.0, 0.0];
    }
    let axis = z.cross(&n);
    let q = [1.0 + d, axis.x, axis.y, axis.z];
    normalize_quat(q).0
}

/// Axis-aligned box in world coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a [f64; 3]>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Aabb::new(first, first);
        for p in it {
            for i in 0..3 {
                b.min[i] = b.min[i].min(p[i]);
                b.max[i] = b.max[i].max(p[i]);
            }
        }
        Some(b)
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn diagonal(&self) -> f64 {
        let d = Vec3::new(
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        );
        d.norm()
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] <= self.max[i])
    }
}
