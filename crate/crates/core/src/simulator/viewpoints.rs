//! Navigable robot viewpoints on a horizontal grid.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{SceneSpec, SENSOR_HEIGHT};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Pose, Vec3};

/// Radius of the robot's footprint disk, meters.
pub const ROBOT_RADIUS: f64 = 0.2;
/// Obstacles lower than this above the floor do not block the robot.
const CLEARANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub id: usize,
    pub pose: Pose,
    pub heading_index: usize,
}

impl Viewpoint {
    pub fn position(&self) -> Vec3 {
        self.pose.translation
    }
}

/// Candidate poses ordered by `(x, y, heading)` with ids equal to their
/// position in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointSet {
    pub viewpoints: Vec<Viewpoint>,
    pub spacing: f64,
    pub headings: usize,
}

impl ViewpointSet {
    pub fn len(&self) -> usize {
        self.viewpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewpoints.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Viewpoint> {
        self.viewpoints.get(id)
    }

    /// The viewpoint closest to `pose` (position first, then heading).
    pub fn nearest(&self, pose: &Pose) -> Option<&Viewpoint> {
        let h = pose.heading();
        self.viewpoints.iter().min_by(|a, b| {
            let da = (a.position() - pose.translation).norm();
            let db = (b.position() - pose.translation).norm();
            let ha = angle_gap(a.pose.heading(), h);
            let hb = angle_gap(b.pose.heading(), h);
            da.total_cmp(&db).then(ha.total_cmp(&hb)).then(a.id.cmp(&b.id))
        })
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Distance from a horizontal point to a gravity-aligned rectangle given in
/// its local frame by half extents.
fn rect_distance(local: &Vec3, hx: f64, hy: f64) -> f64 {
    let dx = (local.x.abs() - hx).max(0.0);
    let dy = (local.y.abs() - hy).max(0.0);
    dx.hypot(dy)
}

fn collides(scene: &SceneSpec, x: f64, y: f64, floor: f64) -> bool {
    let (lo, hi) = (floor + CLEARANCE, floor + SENSOR_HEIGHT);
    let p = Vec3::new(x, y, 0.0);
    for w in &scene.walls {
        if w.max.z <= lo || w.min.z > hi {
            continue;
        }
        let c = (w.min + w.max) * 0.5;
        let local = p - c;
        if rect_distance(&local, 0.5 * (w.max.x - w.min.x), 0.5 * (w.max.y - w.min.y)) < ROBOT_RADIUS {
            return true;
        }
    }
    for o in &scene.objects {
        let b = &o.bbox;
        if b.zmax() <= lo || b.zmin() > hi {
            continue;
        }
        let local = b.to_local(&Vec3::new(x, y, b.center.z));
        if rect_distance(&local, 0.5 * b.extents.x, 0.5 * b.extents.y) < ROBOT_RADIUS {
            return true;
        }
    }
    false
}

/// Grid positions every `spacing` meters from the scene's minimum corner,
/// each with `headings` evenly spaced yaws, at sensor height. Positions
/// where the robot disk touches a wall or object are removed.
pub fn navigable_viewpoints(scene: &SceneSpec, spacing: f64, headings: usize) -> Result<ViewpointSet> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(invalid("viewpoint spacing must be positive"));
    }
    if headings == 0 {
        return Err(invalid("at least one heading is required"));
    }
    let (lo, hi) = (scene.bounds.min, scene.bounds.max);
    let nx = ((hi.x - lo.x) / spacing + 1e-9).floor() as usize;
    let ny = ((hi.y - lo.y) / spacing + 1e-9).floor() as usize;
    let floor = scene.floor_height();
    let z = floor + SENSOR_HEIGHT;
    let mut viewpoints = Vec::new();
    for i in 0..=nx {
        let x = lo.x + i as f64 * spacing;
        for j in 0..=ny {
            let y = lo.y + j as f64 * spacing;
            if collides(scene, x, y, floor) {
                continue;
            }
            for h in 0..headings {
                let yaw = TAU * h as f64 / headings as f64;
                viewpoints.push(Viewpoint {
                    id: viewpoints.len(),
                    pose: Pose::look(Vec3::new(x, y, z), yaw, 0.0),
                    heading_index: h,
                });
            }
        }
    }
    if viewpoints.is_empty() {
        return Err(Error::SceneUnnavigable);
    }
    Ok(ViewpointSet {
        viewpoints,
        spacing,
        headings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrientedBox;
    use crate::simulator::{Aabb, Rect2, Room, SceneObject, SCENE_FORMAT_VERSION};

    fn empty_room(side: f64) -> SceneSpec {
        let w = |min: [f64; 3], max: [f64; 3]| Aabb {
            min: Vec3::from(min),
            max: Vec3::from(max),
        };
        SceneSpec {
            format_version: SCENE_FORMAT_VERSION,
            name: "empty".into(),
            bounds: w([0.0, 0.0, 0.0], [side, side, 2.7]),
            objects: vec![SceneObject {
                label: "book".into(),
                // lies flat on the floor, below the robot's clearance
                bbox: OrientedBox::new(Vec3::new(1.0, 1.0, 0.06), 0.0, Vec3::new(0.2, 0.2, 0.02)),
            }],
            rooms: vec![Room {
                room_type: "office".into(),
                footprint: Rect2 {
                    min: [0.0, 0.0],
                    max: [side, side],
                },
            }],
            walls: vec![
                w([0.0, 0.0, 0.0], [side, side, 0.05]),
                w([0.0, 0.0, 2.65], [side, side, 2.7]),
                w([0.0, 0.0, 0.0], [0.05, side, 2.7]),
                w([side - 0.05, 0.0, 0.0], [side, side, 2.7]),
                w([0.0, 0.0, 0.0], [side, 0.05, 2.7]),
                w([0.0, side - 0.05, 0.0], [side, side, 2.7]),
            ],
        }
    }

    /// Independent count: a grid point survives iff it keeps the robot
    /// radius from all four wall faces.
    fn brute_force_positions(side: f64, spacing: f64) -> usize {
        let n = (side / spacing).round() as usize;
        let coords: Vec<f64> = (0..=n).map(|i| i as f64 * spacing).collect();
        let ok = |v: f64| v - 0.05 >= ROBOT_RADIUS && (side - 0.05) - v >= ROBOT_RADIUS;
        let k = coords.iter().filter(|&&v| ok(v)).count();
        k * k
    }

    #[test]
    fn empty_room_count_matches_enumeration() {
        let s = navigable_viewpoints(&empty_room(4.0), 0.5, 8).unwrap();
        assert_eq!(s.len(), brute_force_positions(4.0, 0.5) * 8);
        assert_eq!(s.len(), 392);
        let one = navigable_viewpoints(&empty_room(4.0), 0.5, 1).unwrap();
        assert_eq!(one.len(), 49);
    }

    #[test]
    fn ordering_and_height() {
        let s = navigable_viewpoints(&empty_room(3.0), 0.5, 4).unwrap();
        for w in s.viewpoints.windows(2) {
            let (a, b) = (w[0].position(), w[1].position());
            let key = |v: &Viewpoint, p: Vec3| (p.x, p.y, v.heading_index);
            assert!(key(&w[0], a) < key(&w[1], b));
        }
        assert!(s.viewpoints.iter().enumerate().all(|(i, v)| v.id == i));
        assert!(s.viewpoints.iter().all(|v| (v.position().z - 1.25).abs() < 1e-12));
    }

    #[test]
    fn packed_scene_is_unnavigable() {
        let mut scene = empty_room(2.0);
        scene.objects.push(SceneObject {
            label: "wardrobe".into(),
            bbox: OrientedBox::new(Vec3::new(1.0, 1.0, 1.0), 0.0, Vec3::new(1.9, 1.9, 1.9)),
        });
        assert!(matches!(
            navigable_viewpoints(&scene, 0.5, 8),
            Err(Error::SceneUnnavigable)
        ));
        assert!(navigable_viewpoints(&scene, 0.0, 8).is_err());
    }
}
