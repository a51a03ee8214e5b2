//! Synthetic ground-truth scenes and the rendering that stands in for the
//! RGB perception front end.
//!
//! Pixels are never synthesized. A view is rendered by casting one ray per
//! pixel against object boxes and walls; the result is what a segmentation
//! and reconstruction stack would hand downstream: per-object detections
//! lifted to 3D and the factored geometry of the view.

mod generate;
mod render;
mod viewpoints;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{OrientedBox, Pose, Vec3};

pub use generate::{container_pairs, generate_scene, SceneTemplate};
pub use render::{
    render_batch, render_view, BatchAnchor, GeometrySource, Hit, RenderedBatch, RenderedView, Renderer, SceneRaycaster,
};
pub use viewpoints::{navigable_viewpoints, Viewpoint, ViewpointSet, ROBOT_RADIUS};

pub const SCENE_FORMAT_VERSION: u32 = 1;
/// Onboard camera height above the ground plane, meters.
pub const SENSOR_HEIGHT: f64 = 1.2;
pub const EXTERNAL_CAMERA_HEIGHT: f64 = 2.5;
/// Downward tilt of the overhead external cameras.
pub const EXTERNAL_CAMERA_PITCH: f64 = std::f64::consts::FRAC_PI_3;

/// Labels rendered as open-top shells so their contents stay visible.
pub const OPEN_TOP_LABELS: [&str; 3] = ["bowl", "basket", "laundry_basket"];

const BUILTIN_VOCABULARY: &str = include_str!("../../assets/labels.txt");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn contains_box(&self, b: &OrientedBox, tol: f64) -> bool {
        let (lo, hi) = b.aabb();
        (0..3).all(|a| lo[a] >= self.min[a] - tol && hi[a] <= self.max[a] + tol)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect2 {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub room_type: String,
    pub footprint: Rect2,
}

/// Ground-truth scene. Walls (including floor and ceiling slabs) are
/// axis-aligned boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub format_version: u32,
    pub name: String,
    pub bounds: Aabb,
    pub objects: Vec<SceneObject>,
    pub rooms: Vec<Room>,
    pub walls: Vec<Aabb>,
}

impl SceneSpec {
    pub fn validate(&self, vocabulary: &Vocabulary) -> Result<()> {
        if self.format_version != SCENE_FORMAT_VERSION {
            return Err(invalid(format!(
                "unsupported scene format_version {} (expected {SCENE_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.objects.is_empty() {
            return Err(invalid("scene has no objects"));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !vocabulary.contains(&o.label) {
                return Err(invalid(format!("object {i} has unknown label '{}'", o.label)));
            }
            if !self.bounds.contains_box(&o.bbox, 1e-6) {
                return Err(invalid(format!("object {i} ('{}') leaves the scene bounds", o.label)));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, vocabulary: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scene: SceneSpec = serde_json::from_str(&text).map_err(|e| Error::parse(path, &text, e))?;
        scene.validate(vocabulary)?;
        Ok(scene)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("scene serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Floor height objects rest on: top of the lowest full-footprint slab.
    pub fn floor_height(&self) -> f64 {
        self.walls
            .iter()
            .filter(|w| {
                w.min.x <= self.bounds.min.x + 1e-9
                    && w.max.x >= self.bounds.max.x - 1e-9
                    && w.min.y <= self.bounds.min.y + 1e-9
                    && w.max.y >= self.bounds.max.y - 1e-9
                    && w.min.z <= self.bounds.min.z + 1e-9
            })
            .map(|w| w.max.z)
            .fold(self.bounds.min.z, f64::max)
    }

    /// Overhead corner cameras: camera `k` sits at the k-th scene corner
    /// (inset 0.3 m) at 2.5 m height, facing the scene center, tilted down.
    pub fn overhead_cameras(&self, count: usize) -> Vec<Pose> {
        let (lo, hi) = (self.bounds.min, self.bounds.max);
        let inset = 0.3;
        let corners = [
            (lo.x + inset, lo.y + inset),
            (hi.x - inset, hi.y - inset),
            (lo.x + inset, hi.y - inset),
            (hi.x - inset, lo.y + inset),
        ];
        let center = (lo + hi) * 0.5;
        (0..count)
            .map(|k| {
                let (x, y) = corners[k % corners.len()];
                let yaw = (center.y - y).atan2(center.x - x);
                Pose::look(
                    Vec3::new(x, y, lo.z + EXTERNAL_CAMERA_HEIGHT),
                    yaw,
                    EXTERNAL_CAMERA_PITCH,
                )
            })
            .collect()
    }
}

/// Measurement noise emulating learned depth/pose estimation and imperfect
/// segmentation. All-zero reproduces ground truth geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub depth_noise_rel: f64,
    pub scale_error_rel: f64,
    pub pose_trans_std: f64,
    pub pose_rot_std: f64,
    pub label_confusion_prob: f64,
    pub detection_dropout_prob: f64,
    pub min_pixels: usize,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            depth_noise_rel: 0.02,
            scale_error_rel: 0.05,
            pose_trans_std: 0.02,
            pose_rot_std: 0.01,
            label_confusion_prob: 0.02,
            detection_dropout_prob: 0.05,
            min_pixels: 20,
        }
    }
}

impl NoiseModel {
    pub fn noise_free() -> Self {
        Self {
            depth_noise_rel: 0.0,
            scale_error_rel: 0.0,
            pose_trans_std: 0.0,
            pose_rot_std: 0.0,
            label_confusion_prob: 0.0,
            detection_dropout_prob: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.depth_noise_rel,
            self.scale_error_rel,
            self.pose_trans_std,
            self.pose_rot_std,
            self.label_confusion_prob,
            self.detection_dropout_prob,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("noise parameters must be non-negative"));
        }
        if self.label_confusion_prob > 1.0 || self.detection_dropout_prob > 1.0 {
            return Err(invalid("noise probabilities must not exceed 1"));
        }
        Ok(())
    }
}

/// Canonical label vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    labels: Vec<String>,
    set: BTreeSet<String>,
}

impl Vocabulary {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_VOCABULARY).expect("builtin vocabulary is valid")
    }

    /// Parses the newline-delimited format. The first line must carry the
    /// `# format_version: 1` header; other `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").trim();
        let version = header
            .strip_prefix('#')
            .and_then(|h| h.trim().strip_prefix("format_version:"))
            .map(|v| v.trim())
            .ok_or_else(|| Error::Configuration("vocabulary lacks a format_version header".into()))?;
        if version != "1" {
            return Err(Error::Configuration(format!(
                "unsupported vocabulary format_version {version}"
            )));
        }
        let mut labels = Vec::new();
        let mut set = BTreeSet::new();
        for l in lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            if set.insert(l.to_string()) {
                labels.push(l.to_string());
            }
        }
        if labels.is_empty() {
            return Err(Error::Configuration("vocabulary is empty".into()));
        }
        Ok(Self { labels, set })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.set.contains(label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_parses_builtin() {
        let v = Vocabulary::builtin();
        assert!(v.contains("chair") && v.contains("stove") && v.contains("sink"));
        assert!(Vocabulary::parse("chair\n").is_err());
        assert!(Vocabulary::parse("# format_version: 2\nchair\n").is_err());
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::default().validate().is_ok());
        let bad = NoiseModel {
            label_confusion_prob: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
