//! Voxel frontiers: known-free voxels bordering unknown space.

use crate::error::Result;
use crate::geometry::{visible_cells, CameraModel, CellState, Pose, VoxelGrid, VoxelIndex};

/// All free voxels 6-adjacent to at least one unknown voxel, ascending.
pub fn compute_frontiers(grid: &VoxelGrid) -> Vec<VoxelIndex> {
    (0..grid.len())
        .filter(|&i| {
            grid.state(i) == CellState::Free && grid.neighbors6(i).any(|n| grid.state(n) == CellState::Unknown)
        })
        .collect()
}

/// Number of frontier voxels visible from `pose`.
pub fn frontier_score(grid: &VoxelGrid, pose: &Pose, camera: &CameraModel, frontier: &[bool]) -> Result<usize> {
    Ok(visible_cells(grid, pose, camera, None)?
        .into_iter()
        .filter(|&(i, _)| frontier[i])
        .count())
}

pub(crate) fn frontier_mask(grid: &VoxelGrid, frontiers: &[VoxelIndex]) -> Vec<bool> {
    let mut mask = vec![false; grid.len()];
    for &i in frontiers {
        mask[i] = true;
    }
    mask
}
