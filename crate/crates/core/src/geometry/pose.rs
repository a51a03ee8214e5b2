use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{invalid, Error, Result};

/// Rigid transform mapping a local frame into its parent frame.
///
/// Camera frames use x right, y down, z forward. The world frame is z-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: t,
        }
    }

    /// Builds a pose from a rotation matrix, rejecting non-rotations.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let should_be_identity = rotation.transpose() * rotation;
        if (should_be_identity - Matrix3::identity()).amax() > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(invalid("rotation is not orthonormal with determinant +1"));
        }
        Ok(Self {
            rotation: Rotation3::from_matrix_unchecked(rotation),
            translation,
        })
    }

    /// Camera pose at `position` looking along heading `yaw` (radians about +z,
    /// 0 = +x) tilted down by `pitch` radians.
    pub fn look(position: Vec3, yaw: f64, pitch: f64) -> Self {
        let (sy, cy) = yaw.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let forward = Vec3::new(cy * cp, sy * cp, -sp);
        let right = Vec3::new(sy, -cy, 0.0);
        let down = forward.cross(&right);
        let m = Matrix3::from_columns(&[right, down, forward]);
        Self {
            rotation: Rotation3::from_matrix_unchecked(m),
            translation: position,
        }
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let r = self.rotation.inverse();
        Pose {
            rotation: r,
            translation: -(r * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        (self.rotation.matrix() - Matrix3::identity()).amax() <= tol && self.translation.amax() <= tol
    }

    /// Max absolute difference over rotation entries and translation components.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        (self.rotation.matrix() - other.rotation.matrix())
            .amax()
            .max((self.translation - other.translation).amax())
    }

    pub fn position(&self) -> Vec3 {
        self.translation
    }

    /// Heading of the optical axis projected on the ground plane.
    pub fn heading(&self) -> f64 {
        let f = self.rotation * Vec3::z();
        f.y.atan2(f.x)
    }
}

/// Two JSON spellings are accepted: an explicit rotation matrix, or a camera
/// placement given by position, heading and downward tilt.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoseRepr {
    Matrix {
        rotation: [[f64; 3]; 3],
        translation: [f64; 3],
    },
    Placement {
        position: [f64; 3],
        yaw: f64,
        #[serde(default)]
        pitch: f64,
    },
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(value: PoseRepr) -> Result<Self> {
        match value {
            PoseRepr::Matrix { rotation, translation } => {
                let m = Matrix3::from_fn(|r, c| rotation[r][c]);
                Pose::new(m, Vec3::from(translation))
            }
            PoseRepr::Placement { position, yaw, pitch } => Ok(Pose::look(Vec3::from(position), yaw, pitch)),
        }
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let m = p.rotation.matrix();
        PoseRepr::Matrix {
            rotation: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}
