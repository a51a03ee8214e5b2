use super::{Pose, Vec3};
use crate::error::{invalid, Result};

/// Per-view output of a feed-forward reconstruction model: unit rays in the
/// camera frame, depths known only up to a global scale, the camera pose in
/// the first view's frame, and the metric scale shared by the whole batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredView {
    pub width: usize,
    pub height: usize,
    pub rays: Vec<Vec3>,
    pub depths: Vec<f64>,
    pub relative_pose: Pose,
    pub metric_scale: f64,
    pub valid_mask: Vec<bool>,
}

impl FactoredView {
    pub fn validate(&self) -> Result<()> {
        let n = self.width * self.height;
        if self.rays.len() != n || self.depths.len() != n || self.valid_mask.len() != n {
            return Err(invalid("factored view buffers do not match width x height"));
        }
        if !(self.metric_scale > 0.0 && self.metric_scale.is_finite()) {
            return Err(invalid("metric scale must be positive"));
        }
        for i in 0..n {
            if !self.valid_mask[i] {
                continue;
            }
            if !(self.depths[i] > 0.0 && self.depths[i].is_finite()) {
                return Err(invalid(format!("non-positive depth at pixel {i}")));
            }
            if (self.rays[i].norm() - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("non-unit ray at pixel {i}")));
            }
        }
        Ok(())
    }

    /// Metric point of one pixel in this view's camera frame.
    pub fn camera_point(&self, pixel: usize) -> Vec3 {
        self.rays[pixel] * (self.metric_scale * self.depths[pixel])
    }
}

/// Back-projects every valid pixel into the reference (first-view) frame,
/// in raster order.
pub fn compose_backprojection(view: &FactoredView) -> Result<Vec<Vec3>> {
    view.validate()?;
    Ok((0..view.rays.len())
        .filter(|&i| view.valid_mask[i])
        .map(|i| view.relative_pose.transform_point(&view.camera_point(i)))
        .collect())
}

/// Lifts batch-relative poses into the global frame given the first view's
/// global pose.
pub fn anchor_poses(first_view_global: &Pose, relative_poses: &[Pose]) -> Result<Vec<Pose>> {
    let first = relative_poses
        .first()
        .ok_or_else(|| invalid("relative pose list is empty"))?;
    if !first.is_identity(1e-9) {
        return Err(invalid(
            "first relative pose must be the identity (batch reference convention)",
        ));
    }
    let mut out = Vec::with_capacity(relative_poses.len());
    out.push(*first_view_global);
    out.extend(relative_poses[1..].iter().map(|r| first_view_global.compose(r)));
    Ok(out)
}
