//! Multi-traversal datasets: manifest I/O, the ROI trigger and splits.

mod manifest;
mod roi;

pub use manifest::{camera_to_pose, load_manifest, save_manifest, BoxesField, FrameDoc, IntrinsicsDoc, ManifestDoc, TraversalDoc};
pub use roi::{
    roi_trigger, segment_length_inside, Roi, RoiDecision, RoiDiagnostics, Trajectory, TrajectorySample,
    MIN_DURATION, MIN_LENGTH, MIN_OVERLAP,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::condition::Box3d;
use crate::error::{Error, Result};
use crate::rasterizer::CameraFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Day,
    Night,
    Rain,
}

/// One posed image and its optional supervision files (absolute paths).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub camera_id: String,
    pub camera: CameraFrame,
    pub image: PathBuf,
    pub depth: Option<PathBuf>,
    pub normal: Option<PathBuf>,
    pub dyn_mask: Option<PathBuf>,
    pub boxes: Vec<Box3d>,
}

impl FrameRecord {
    pub fn timestamp(&self) -> f64 {
        self.camera.timestamp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Traversal {
    pub id: u32,
    pub condition: Condition,
    pub frames: Vec<FrameRecord>,
}

impl Traversal {
    /// Ground-plane track of the camera centers.
    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::new(
            self.frames
                .iter()
                .map(|f| TrajectorySample {
                    time: f.timestamp(),
                    position: [f.camera.translation.x, f.camera.translation.y],
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraversalDataset {
    pub scene_id: String,
    pub roi: Option<Roi>,
    pub point_cloud: Option<PathBuf>,
    pub traversals: Vec<Traversal>,
}

impl TraversalDataset {
    pub fn frame_count(&self) -> usize {
        self.traversals.iter().map(|t| t.frames.len()).sum()
    }

    pub fn traversal(&self, id: u32) -> Option<&Traversal> {
        self.traversals.iter().find(|t| t.id == id)
    }

    pub fn traversal_ids(&self) -> Vec<u32> {
        self.traversals.iter().map(|t| t.id).collect()
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameRecord> {
        self.traversals.iter().flat_map(|t| t.frames.iter())
    }
}

/// Partitions by traversal id: `(everything else, held_out)`.
pub fn split_train_novel(ds: &TraversalDataset, held_out: u32) -> Result<(TraversalDataset, TraversalDataset)> {
    if ds.traversal(held_out).is_none() {
        return Err(Error::UnknownTraversal(held_out));
    }
    if ds.traversals.len() < 2 {
        return Err(Error::SingleTraversal);
    }
    let part = |keep: bool| TraversalDataset {
        scene_id: ds.scene_id.clone(),
        roi: ds.roi,
        point_cloud: ds.point_cloud.clone(),
        traversals: ds
            .traversals
            .iter()
            .filter(|t| (t.id == held_out) != keep)
            .cloned()
            .collect(),
    };
    Ok((part(true), part(false)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rasterizer::Intrinsics;

    fn ds(n: u32) -> TraversalDataset {
        let cam = CameraFrame::new(
            Intrinsics {
                fx: 10.0,
                fy: 10.0,
                cx: 4.0,
                cy: 4.0,
                width: 8,
                height: 8,
            },
            [1.0, 0.0, 0.0, 0.0],
            Default::default(),
        );
        TraversalDataset {
            scene_id: "s".into(),
            roi: None,
            point_cloud: None,
            traversals: (1..=n)
                .map(|id| Traversal {
                    id,
                    condition: Condition::Day,
                    frames: vec![FrameRecord {
                        camera_id: "front".into(),
                        camera: cam.clone().with_traversal(id, 0.0),
                        image: format!("{id}.png").into(),
                        depth: None,
                        normal: None,
                        dyn_mask: None,
                        boxes: vec![],
                    }],
                })
                .collect(),
        }
    }

    #[test]
    fn hold_out_last_of_five() {
        let (train, novel) = split_train_novel(&ds(5), 5).unwrap();
        assert_eq!((train.traversals.len(), novel.traversals.len()), (4, 1));
        assert_eq!(train.frame_count() + novel.frame_count(), 5);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split_train_novel(&ds(5), 9), Err(Error::UnknownTraversal(9))));
        assert!(split_train_novel(&ds(1), 1)
            .unwrap_err()
            .to_string()
            .contains("cannot hold out the only traversal"));
    }
}
