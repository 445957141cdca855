//! JSON manifest. Schema is documented in `docs/FORMATS.md`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Condition, FrameRecord, Roi, Traversal, TraversalDataset};
use crate::condition::Box3d;
use crate::error::{Error, Result};
use crate::math::{matrix_to_quat, Mat3, Vec3};
use crate::rasterizer::{CameraFrame, Intrinsics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDoc {
    pub scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi: Option<Roi>,
    /// Background point cloud (PLY) used for initialization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_cloud: Option<String>,
    pub traversals: Vec<TraversalDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraversalDoc {
    pub id: u32,
    pub condition: Condition,
    pub frames: Vec<FrameDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsDoc {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub w: usize,
    pub h: usize,
}

/// 3D boxes given inline or as a path to a JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxesField {
    Inline(Vec<Box3d>),
    Path(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDoc {
    pub timestamp: f64,
    #[serde(default = "default_camera_id")]
    pub camera_id: String,
    /// World-from-camera 4x4, row-major.
    pub pose: [f64; 16],
    pub intrinsics: IntrinsicsDoc,
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dyn_mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<BoxesField>,
}

fn default_camera_id() -> String {
    "front".into()
}

fn resolve(root: &Path, p: &str, what: &str, ctx: &str) -> Result<PathBuf> {
    if p.trim().is_empty() || p.contains('\0') {
        return Err(Error::Manifest(format!("{ctx}: empty or malformed {what} path")));
    }
    let path = Path::new(p);
    Ok(if path.is_absolute() {
        path.to_path_buf()
    } else {
        root.join(path)
    })
}

fn pose_to_camera(pose: &[f64; 16], intr: Intrinsics, ctx: &str) -> Result<CameraFrame> {
    if pose.iter().any(|v| !v.is_finite()) {
        return Err(Error::Manifest(format!("{ctx}: pose has non-finite entries")));
    }
    let r = Mat3::new(pose[0], pose[1], pose[2], pose[4], pose[5], pose[6], pose[8], pose[9], pose[10]);
    let t = Vec3::new(pose[3], pose[7], pose[11]);
    let ortho = (r.transpose() * r - Mat3::identity()).abs().max();
    let bottom = [pose[12], pose[13], pose[14], pose[15]];
    if ortho > 1e-4 || r.determinant() < 0.0 || bottom != [0.0, 0.0, 0.0, 1.0] {
        return Err(Error::Manifest(format!("{ctx}: pose is not a rigid transform")));
    }
    Ok(CameraFrame::new(intr, matrix_to_quat(&r), t))
}

/// Row-major world-from-camera matrix of a camera.
#[rustfmt::skip]
pub fn camera_to_pose(cam: &CameraFrame) -> [f64; 16] {
    let r = cam.world_from_camera();
    let t = cam.translation;
    [
        r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
        r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
        r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        0.0, 0.0, 0.0, 1.0,
    ]
}

impl ManifestDoc {
    /// Validates and resolves relative paths against `root`.
    pub fn into_dataset(self, root: &Path) -> Result<TraversalDataset> {
        let mut seen = HashSet::new();
        let mut traversals = Vec::with_capacity(self.traversals.len());
        for t in self.traversals {
            if !seen.insert(t.id) {
                return Err(Error::DuplicateTraversal(t.id));
            }
            let mut frames = Vec::with_capacity(t.frames.len());
            for (k, f) in t.frames.into_iter().enumerate() {
                let ctx = format!("traversal {} frame {k}", t.id);
                let intr = Intrinsics {
                    fx: f.intrinsics.fx,
                    fy: f.intrinsics.fy,
                    cx: f.intrinsics.cx,
                    cy: f.intrinsics.cy,
                    width: f.intrinsics.w,
                    height: f.intrinsics.h,
                };
                let camera = pose_to_camera(&f.pose, intr, &ctx)?.with_traversal(t.id, f.timestamp);
                camera
                    .validate()
                    .map_err(|e| Error::Manifest(format!("{ctx}: {e}")))?;
                if !f.timestamp.is_finite() {
                    return Err(Error::Manifest(format!("{ctx}: non-finite timestamp")));
                }
                let opt = |p: &Option<String>, what: &str| -> Result<Option<PathBuf>> {
                    p.as_deref().map(|s| resolve(root, s, what, &ctx)).transpose()
                };
                let boxes = match &f.boxes {
                    None => Vec::new(),
                    Some(BoxesField::Inline(b)) => b.clone(),
                    Some(BoxesField::Path(p)) => {
                        let path = resolve(root, p, "boxes", &ctx)?;
                        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                        serde_json::from_str(&text)
                            .map_err(|e| Error::Manifest(format!("{ctx}: boxes file {}: {e}", path.display())))?
                    }
                };
                for b in &boxes {
                    b.validate().map_err(|e| Error::Manifest(format!("{ctx}: {e}")))?;
                }
                frames.push(FrameRecord {
                    camera_id: f.camera_id.clone(),
                    camera,
                    image: resolve(root, &f.image, "image", &ctx)?,
                    depth: opt(&f.depth, "depth")?,
                    normal: opt(&f.normal, "normal")?,
                    dyn_mask: opt(&f.dyn_mask, "dyn_mask")?,
                    boxes,
                });
            }
            if frames.windows(2).any(|w| !(w[1].timestamp() > w[0].timestamp())) {
                return Err(Error::Manifest(format!(
                    "traversal {}: timestamps not strictly increasing",
                    t.id
                )));
            }
            traversals.push(Traversal {
                id: t.id,
                condition: t.condition,
                frames,
            });
        }
        let point_cloud = self
            .point_cloud
            .as_deref()
            .map(|p| resolve(root, p, "point_cloud", "dataset"))
            .transpose()?;
        Ok(TraversalDataset {
            scene_id: self.scene_id,
            roi: self.roi,
            point_cloud,
            traversals,
        })
    }
}

pub fn load_manifest(path: &Path) -> Result<TraversalDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ManifestDoc = serde_json::from_str(&text)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let root = path.parent().unwrap_or(Path::new("."));
    doc.into_dataset(root)
}

fn relative(p: &Path, root: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).to_string_lossy().into_owned()
}

/// Writes a dataset as a manifest; paths under the manifest directory are
/// stored relative to it.
pub fn save_manifest(ds: &TraversalDataset, path: &Path) -> Result<()> {
    let root = path.parent().unwrap_or(Path::new("."));
    let doc = ManifestDoc {
        scene_id: ds.scene_id.clone(),
        roi: ds.roi,
        point_cloud: ds.point_cloud.as_deref().map(|p| relative(p, root)),
        traversals: ds
            .traversals
            .iter()
            .map(|t| TraversalDoc {
                id: t.id,
                condition: t.condition,
                frames: t
                    .frames
                    .iter()
                    .map(|f| {
                        let k = &f.camera.intrinsics;
                        FrameDoc {
                            timestamp: f.timestamp(),
                            camera_id: f.camera_id.clone(),
                            pose: camera_to_pose(&f.camera),
                            intrinsics: IntrinsicsDoc {
                                fx: k.fx,
                                fy: k.fy,
                                cx: k.cx,
                                cy: k.cy,
                                w: k.width,
                                h: k.height,
                            },
                            image: relative(&f.image, root),
                            depth: f.depth.as_deref().map(|p| relative(p, root)),
                            normal: f.normal.as_deref().map(|p| relative(p, root)),
                            dyn_mask: f.dyn_mask.as_deref().map(|p| relative(p, root)),
                            boxes: (!f.boxes.is_empty()).then(|| BoxesField::Inline(f.boxes.clone())),
                        }
                    })
                    .collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
      "scene_id": "demo",
      "roi": {"center": [0, 0], "radius": 200},
      "traversals": [{
        "id": 1, "condition": "day",
        "frames": [{
          "timestamp": 0.0,
          "pose": [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1],
          "intrinsics": {"fx": 50, "fy": 50, "cx": 32, "cy": 32, "w": 64, "h": 64},
          "image": "img/0.png"
        }]
      }]
    }"#;

    fn parse(text: &str) -> Result<TraversalDataset> {
        let doc: ManifestDoc = serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        doc.into_dataset(Path::new("/data"))
    }

    #[test]
    fn minimal_manifest() {
        let ds = parse(MINIMAL).unwrap();
        assert_eq!(ds.frame_count(), 1);
        assert_eq!(ds.traversals[0].frames[0].image, PathBuf::from("/data/img/0.png"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        let mut v2 = v.clone();
        let t = v["traversals"][0].clone();
        v2["traversals"].as_array_mut().unwrap().push(t);
        let err = parse(&v2.to_string()).unwrap_err();
        assert!(err.to_string().contains("duplicate traversal id"));
    }

    #[test]
    fn zero_focal_rejected() {
        let text = MINIMAL.replace("\"fx\": 50", "\"fx\": 0");
        assert!(parse(&text).unwrap_err().to_string().contains("invalid intrinsics"));
    }

    #[test]
    fn unknown_condition_rejected() {
        let text = MINIMAL.replace("\"day\"", "\"fog\"");
        assert!(parse(&text).is_err());
    }
}
