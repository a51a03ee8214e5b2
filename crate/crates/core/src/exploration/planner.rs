//! Candidate filtering, scoring and deterministic argmax.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::frontier::{compute_frontiers, frontier_mask};
use super::{default_scoring_camera, visible_indices, CompletionSample, InfoGainScorer, VisitMarks};
use crate::error::{invalid, Error, Result};
use crate::geometry::{CameraModel, CellState, Pose, RayCaster, VoxelGrid};
use crate::rng::rng_for;
use crate::simulator::{Viewpoint, ViewpointSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Frontier,
    #[default]
    Semantic,
    Random,
}

impl PlannerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Frontier => "frontier",
            PlannerKind::Semantic => "semantic",
            PlannerKind::Random => "random",
        }
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frontier" => Ok(PlannerKind::Frontier),
            "semantic" => Ok(PlannerKind::Semantic),
            "random" => Ok(PlannerKind::Random),
            other => Err(invalid(format!("unknown planner '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub planner: PlannerKind,
    /// Completion samples per step (semantic planner).
    pub num_samples: usize,
    /// Ray grid used when scoring candidates; coarser than the rendering
    /// camera to keep per-step cost low.
    pub scoring_camera: CameraModel,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            planner: PlannerKind::Semantic,
            num_samples: 8,
            scoring_camera: default_scoring_camera(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        self.scoring_camera.validate()?;
        if self.planner == PlannerKind::Semantic && !(2..=64).contains(&self.num_samples) {
            return Err(invalid("the semantic planner needs between 2 and 64 samples"));
        }
        Ok(())
    }
}

/// Chosen viewpoint, its score and every candidate's score (by id).
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub viewpoint: usize,
    pub score: f64,
    pub scores: Vec<(usize, f64)>,
}

/// Viewpoints whose position voxel is known free, excluding `current`.
pub fn candidate_viewpoints<'a>(
    grid: &VoxelGrid,
    viewpoints: &'a ViewpointSet,
    current: Option<usize>,
) -> Vec<&'a Viewpoint> {
    viewpoints
        .viewpoints
        .iter()
        .filter(|v| Some(v.id) != current && grid.state_at(&v.position()) == Some(CellState::Free))
        .collect()
}

/// Highest score wins; ties go to the shorter move, then the smaller id.
fn argmax(candidates: &[&Viewpoint], scores: Vec<f64>, from: &Pose) -> Selection {
    let mut best = 0;
    let dist = |v: &Viewpoint| (v.position() - from.translation).norm();
    for i in 1..candidates.len() {
        let (a, b) = (candidates[i], candidates[best]);
        let better = scores[i] > scores[best]
            || (scores[i] == scores[best] && (dist(a) < dist(b) || (dist(a) == dist(b) && a.id < b.id)));
        if better {
            best = i;
        }
    }
    Selection {
        viewpoint: candidates[best].id,
        score: scores[best],
        scores: candidates.iter().map(|v| v.id).zip(scores).collect(),
    }
}

/// Frontier baseline: maximize the number of visible frontier voxels.
pub fn select_nbv_frontier(
    grid: &VoxelGrid,
    viewpoints: &ViewpointSet,
    from: &Pose,
    current: Option<usize>,
    config: &PlannerConfig,
) -> Result<Selection> {
    let candidates = candidate_viewpoints(grid, viewpoints, current);
    if candidates.is_empty() {
        return Err(Error::ExplorationExhausted);
    }
    let frontiers = compute_frontiers(grid);
    if frontiers.is_empty() {
        return Err(Error::ExplorationComplete);
    }
    let mask = frontier_mask(grid, &frontiers);
    let caster = RayCaster::new(&config.scoring_camera);
    let mut marks = VisitMarks::new(grid.len());
    let mut seen = Vec::new();
    let scores = candidates
        .iter()
        .map(|v| {
            visible_indices(grid, &caster, &v.pose, &mut marks, &mut seen);
            seen.iter().filter(|&&i| mask[i]).count() as f64
        })
        .collect();
    Ok(argmax(&candidates, scores, from))
}

/// Semantic planner: maximize information gain over shared completion
/// samples.
pub fn select_nbv_semantic(
    samples: &[CompletionSample],
    grid: &VoxelGrid,
    viewpoints: &ViewpointSet,
    from: &Pose,
    current: Option<usize>,
    config: &PlannerConfig,
) -> Result<Selection> {
    let candidates = candidate_viewpoints(grid, viewpoints, current);
    if candidates.is_empty() {
        return Err(Error::ExplorationExhausted);
    }
    let mut scorer = InfoGainScorer::new(grid, samples, &config.scoring_camera)?;
    let scores = candidates
        .iter()
        .map(|v| scorer.score(&v.pose))
        .collect::<Result<Vec<f64>>>()?;
    Ok(argmax(&candidates, scores, from))
}

/// Uniformly random candidate, keyed on `(seed, step)`.
pub fn select_nbv_random(
    grid: &VoxelGrid,
    viewpoints: &ViewpointSet,
    current: Option<usize>,
    seed: u64,
    step: u64,
) -> Result<Selection> {
    let candidates = candidate_viewpoints(grid, viewpoints, current);
    if candidates.is_empty() {
        return Err(Error::ExplorationExhausted);
    }
    let mut rng = rng_for(&[seed, step, 0x4A4D]);
    let pick = candidates[rng.random_range(0..candidates.len())];
    Ok(Selection {
        viewpoint: pick.id,
        score: 0.0,
        scores: vec![(pick.id, 0.0)],
    })
}

/// Dispatches on `config.planner`; `samples` is only used by the semantic
/// planner.
pub fn select_nbv(
    config: &PlannerConfig,
    samples: &[CompletionSample],
    grid: &VoxelGrid,
    viewpoints: &ViewpointSet,
    from: &Pose,
    current: Option<usize>,
    seed_step: (u64, u64),
) -> Result<Selection> {
    match config.planner {
        PlannerKind::Frontier => select_nbv_frontier(grid, viewpoints, from, current, config),
        PlannerKind::Semantic => select_nbv_semantic(samples, grid, viewpoints, from, current, config),
        PlannerKind::Random => select_nbv_random(grid, viewpoints, current, seed_step.0, seed_step.1),
    }
}
