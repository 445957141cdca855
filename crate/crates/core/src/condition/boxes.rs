use serde::{Deserialize, Serialize};

use crate::buffers::ImageBuf;
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::rasterizer::CameraFrame;

/// Oriented 3D box, yawed about world +z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3d {
    pub center: [f64; 3],
    /// Length (local x), width (local y), height (local z), meters.
    pub size: [f64; 3],
    pub yaw: f64,
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub track_id: u64,
}

impl Box3d {
    pub fn validate(&self) -> Result<()> {
        if self.size.iter().all(|s| *s > 0.0 && s.is_finite())
            && self.center.iter().all(|c| c.is_finite())
            && self.yaw.is_finite()
        {
            Ok(())
        } else {
            Err(Error::Manifest(format!("invalid box {self:?}")))
        }
    }

    fn axes(&self) -> [Vec3; 3] {
        let (s, c) = self.yaw.sin_cos();
        [Vec3::new(c, s, 0.0), Vec3::new(-s, c, 0.0), Vec3::z()]
    }

    /// Corner `k` has local signs from bits: bit0 → x, bit1 → y, bit2 → z.
    pub fn corners(&self) -> [Vec3; 8] {
        let ax = self.axes();
        let c = Vec3::from(self.center);
        std::array::from_fn(|k| {
            let sx = if k & 1 == 0 { -0.5 } else { 0.5 };
            let sy = if k & 2 == 0 { -0.5 } else { 0.5 };
            let sz = if k & 4 == 0 { -0.5 } else { 0.5 };
            c + ax[0] * (sx * self.size[0]) + ax[1] * (sy * self.size[1]) + ax[2] * (sz * self.size[2])
        })
    }

    /// Slab test of a world ray against the box. Returns the entry parameter
    /// `t ≥ 0` (origin inside the box gives `0`).
    pub fn ray_hit(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let ax = self.axes();
        let rel = origin - Vec3::from(self.center);
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            let o = rel.dot(&ax[i]);
            let d = dir.dot(&ax[i]);
            let h = 0.5 * self.size[i];
            if d.abs() < 1e-300 {
                if o < -h || o > h {
                    return None;
                }
                continue;
            }
            let (a, b) = ((-h - o) / d, (h - o) / d);
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
        if t0 > t1 || t1 < 0.0 {
            return None;
        }
        Some(t0.max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedBox {
    /// Pixel coordinates of the 8 corners (meaningless where not visible).
    pub corners: [[f64; 2]; 8],
    pub visible: [bool; 8],
    /// `[x_min, y_min, x_max, y_max]` over visible corners.
    pub hull: [f64; 4],
    pub category: String,
    pub track_id: u64,
}

/// Pinhole projection of the box corners; corners at or behind the near
/// plane are flagged invisible.
pub fn project_box(b: &Box3d, cam: &CameraFrame, near: f64) -> Result<ProjectedBox> {
    let k = &cam.intrinsics;
    let mut corners = [[0.0; 2]; 8];
    let mut visible = [false; 8];
    let mut hull = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for (i, p) in b.corners().iter().enumerate() {
        let c = cam.to_camera(p);
        if c.z <= near {
            continue;
        }
        let u = k.fx * c.x / c.z + k.cx;
        let v = k.fy * c.y / c.z + k.cy;
        corners[i] = [u, v];
        visible[i] = true;
        hull = [hull[0].min(u), hull[1].min(v), hull[2].max(u), hull[3].max(v)];
    }
    if !visible.iter().any(|v| *v) {
        return Err(Error::BoxNotVisible);
    }
    Ok(ProjectedBox {
        corners,
        visible,
        hull,
        category: b.category.clone(),
        track_id: b.track_id,
    })
}

/// Instance ids (`index + 1`, `0` = none) and box-surface depth per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMaps {
    pub width: usize,
    pub height: usize,
    pub ids: Vec<u16>,
    /// View-space z of the nearest box surface, 0 where no box is hit.
    pub depth: ImageBuf,
}

impl InstanceMaps {
    pub fn id(&self, x: usize, y: usize) -> u16 {
        self.ids[y * self.width + x]
    }
}

/// Casts one ray per pixel center against every box; the nearest hit wins.
pub fn rasterize_box_mask_depth(boxes: &[Box3d], cam: &CameraFrame) -> InstanceMaps {
    let (w, h) = (cam.intrinsics.width, cam.intrinsics.height);
    let mut ids = vec![0u16; w * h];
    let mut depth = ImageBuf::new(w, h, 1);
    let origin = cam.center();
    let forward = cam.world_from_camera().column(2).into_owned();
    for y in 0..h {
        for x in 0..w {
            let dir = cam.ray_direction(x as f64, y as f64);
            let mut best: Option<(f64, usize)> = None;
            for (i, b) in boxes.iter().enumerate() {
                if let Some(t) = b.ray_hit(&origin, &dir) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, i));
                    }
                }
            }
            if let Some((t, i)) = best {
                let z = t * dir.dot(&forward);
                if z > 0.0 {
                    ids[y * w + x] = (i + 1).min(u16::MAX as usize) as u16;
                    depth.data[y * w + x] = z;
                }
            }
        }
    }
    InstanceMaps {
        width: w,
        height: h,
        ids,
        depth,
    }
}
