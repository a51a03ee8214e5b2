//! Next-best-view selection.
//!
//! Two utilities rank candidate viewpoints: the number of frontier voxels a
//! view would see (the baseline), and the expected information gain of the
//! view over a set of sampled scene completions (the semantic planner).

mod completion;
mod frontier;
mod info_gain;
mod planner;
mod remote;

pub use completion::{
    room_posterior, sample_completions, unknown_components, CompletionRequest, CompletionSample, HypothesizedObject,
    Priors, RoomPrior, UnknownComponent, MIN_COMPONENT_VOXELS,
};
pub use frontier::{compute_frontiers, frontier_score};
pub use info_gain::{entropy_bits, info_gain, InfoGainScorer};
pub use planner::{
    candidate_viewpoints, select_nbv, select_nbv_frontier, select_nbv_random, select_nbv_semantic, PlannerConfig,
    PlannerKind, Selection,
};
pub use remote::{draw_samples, RemoteSampler, DEFAULT_REMOTE_TIMEOUT};

use crate::geometry::{CameraModel, Pose, RayCaster, VoxelGrid, VoxelIndex};

/// Reusable visited-marks for repeated visibility queries on one grid.
#[derive(Debug, Clone)]
pub(crate) struct VisitMarks {
    stamp: Vec<u32>,
    generation: u32,
}

impl VisitMarks {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            stamp: vec![0; len],
            generation: 0,
        }
    }

    pub(crate) fn reset(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
    }

    /// Marks `idx`; returns true the first time since the last reset.
    pub(crate) fn insert(&mut self, idx: VoxelIndex) -> bool {
        if self.stamp[idx] == self.generation {
            false
        } else {
            self.stamp[idx] = self.generation;
            true
        }
    }
}

/// Visible voxels from `pose` on the grid's own occupancy, without the
/// per-call allocation of `visible_cells`. The result is unsorted.
pub(crate) fn visible_indices(
    grid: &VoxelGrid,
    caster: &RayCaster,
    pose: &Pose,
    marks: &mut VisitMarks,
    out: &mut Vec<VoxelIndex>,
) {
    out.clear();
    marks.reset();
    let cells = grid.cells();
    caster.cast(grid, pose, |_, idx| {
        if marks.insert(idx) {
            out.push(idx);
        }
        cells[idx] != crate::geometry::CellState::Occupied
    });
}

pub(crate) fn default_scoring_camera() -> CameraModel {
    CameraModel {
        width: 16,
        height: 12,
        ..CameraModel::default()
    }
}
