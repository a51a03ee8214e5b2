//! Factored-geometry composition, gravity-aligned boxes and the voxel map.

mod boxes;
mod factored;
mod pose;
mod voxel;

pub use boxes::{
    box_iou, containment_fraction, fit_oriented_box, footprint_gap, footprint_intersection_area, footprint_overlap,
    intersection_volume, vertical_overlap, OrientedBox, MIN_EXTENT,
};
pub use factored::{anchor_poses, compose_backprojection, FactoredView};
pub use pose::Pose;
pub use voxel::{integrate_scan, visible_cells, CameraModel, CellState, RayCaster, VoxelGrid, VoxelIndex};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Vec2 = nalgebra::Vector2<f64>;

/// Monte-Carlo IoU estimate used as an independent check in unit tests.
#[cfg(test)]
pub(crate) fn monte_carlo_iou_for_tests(a: &OrientedBox, b: &OrientedBox, samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (amin, amax) = a.aabb();
    let (bmin, bmax) = b.aabb();
    let lo = amin.inf(&bmin);
    let hi = amax.sup(&bmax);
    let (mut inter, mut union) = (0usize, 0usize);
    for _ in 0..samples {
        let p = Vec3::new(
            rng.random_range(lo.x..hi.x),
            rng.random_range(lo.y..hi.y),
            rng.random_range(lo.z..hi.z),
        );
        let (ia, ib) = (a.contains_point(&p, 0.0), b.contains_point(&p, 0.0));
        if ia && ib {
            inter += 1;
        }
        if ia || ib {
            union += 1;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}
