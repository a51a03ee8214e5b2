//! Expected information gain of a view over sampled scene completions.
//!
//! Each sample predicts, for every voxel a view would see, either the label
//! of a hypothesized object or "free". Rendering a sample is deterministic,
//! so the conditional entropy term vanishes and the gain of a view is the
//! summed entropy of the per-voxel label mixture across samples. Only voxels
//! that are unknown in the real grid and reached by the view under every
//! sample enter the sum.

use crate::error::{invalid, Result};
use crate::geometry::{visible_cells, CameraModel, CellState, Pose, RayCaster, VoxelGrid, VoxelIndex};

use super::CompletionSample;

/// Shannon entropy, in bits, of the empirical distribution given by
/// `counts`.
pub fn entropy_bits(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Entropy of the labels the samples assign to one voxel; label order does
/// not matter.
fn voxel_entropy(labels: &mut [u16]) -> f64 {
    labels.sort_unstable();
    let mut counts = Vec::with_capacity(labels.len());
    let mut i = 0;
    while i < labels.len() {
        let j = labels[i..]
            .iter()
            .position(|&l| l != labels[i])
            .map_or(labels.len(), |p| i + p);
        counts.push(j - i);
        i = j;
    }
    entropy_bits(&counts)
}

fn check_samples(samples: &[CompletionSample], grid: &VoxelGrid) -> Result<()> {
    if samples.len() < 2 {
        return Err(invalid("information gain needs at least two samples"));
    }
    if samples
        .iter()
        .any(|s| s.derived_occupancy.len() != grid.len() || s.voxel_labels.len() != grid.len())
    {
        return Err(invalid("sample does not match the grid"));
    }
    Ok(())
}

/// Information gain of viewing from `pose`, in bits, computed directly from
/// one visibility query per sample.
pub fn info_gain(pose: &Pose, samples: &[CompletionSample], grid: &VoxelGrid, camera: &CameraModel) -> Result<f64> {
    check_samples(samples, grid)?;
    let k = samples.len();
    let mut reach = vec![0usize; grid.len()];
    for s in samples {
        for (idx, _) in visible_cells(grid, pose, camera, Some(&s.derived_occupancy))? {
            if grid.state(idx) == CellState::Unknown {
                reach[idx] += 1;
            }
        }
    }
    let mut labels = vec![0u16; k];
    let mut total = 0.0;
    for (idx, &r) in reach.iter().enumerate() {
        if r == k {
            for (l, s) in labels.iter_mut().zip(samples) {
                *l = s.voxel_labels[idx];
            }
            total += voxel_entropy(&mut labels);
        }
    }
    Ok(total)
}

/// Scores many candidate poses against one sample set with a single grid
/// traversal per ray, tracking which samples a ray still passes through.
pub struct InfoGainScorer<'a> {
    grid: &'a VoxelGrid,
    samples: &'a [CompletionSample],
    caster: RayCaster,
    /// Bit `s` set where sample `s` hypothesizes an occupied voxel.
    blocking: Vec<u64>,
    reach: Vec<u64>,
    stamp: Vec<u32>,
    generation: u32,
    touched: Vec<VoxelIndex>,
}

impl<'a> InfoGainScorer<'a> {
    pub fn new(grid: &'a VoxelGrid, samples: &'a [CompletionSample], camera: &CameraModel) -> Result<Self> {
        check_samples(samples, grid)?;
        if samples.len() > 64 {
            return Err(invalid("at most 64 samples are supported"));
        }
        let mut blocking = vec![0u64; grid.len()];
        for (s, sample) in samples.iter().enumerate() {
            for (b, st) in blocking.iter_mut().zip(&sample.derived_occupancy) {
                if *st == CellState::Occupied {
                    *b |= 1 << s;
                }
            }
        }
        Ok(Self {
            grid,
            samples,
            caster: RayCaster::new(camera),
            blocking,
            reach: vec![0; grid.len()],
            stamp: vec![0; grid.len()],
            generation: 0,
            touched: Vec::new(),
        })
    }

    pub fn score(&mut self, pose: &Pose) -> Result<f64> {
        if !self.grid.contains(&pose.translation) {
            return Err(invalid("pose lies outside the voxel grid"));
        }
        let k = self.samples.len();
        let full: u64 = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        self.touched.clear();
        let (reach, stamp, touched, blocking, generation) = (
            &mut self.reach,
            &mut self.stamp,
            &mut self.touched,
            &self.blocking,
            self.generation,
        );
        let mut alive = full;
        let mut current_ray = usize::MAX;
        self.caster.cast(self.grid, pose, |ray, idx| {
            if ray != current_ray {
                current_ray = ray;
                alive = full;
            }
            if stamp[idx] != generation {
                stamp[idx] = generation;
                reach[idx] = 0;
                touched.push(idx);
            }
            reach[idx] |= alive;
            alive &= !blocking[idx];
            alive != 0
        });
        touched.sort_unstable();
        let mut labels = vec![0u16; k];
        let mut total = 0.0;
        for &idx in touched.iter() {
            if reach[idx] == full && self.grid.state(idx) == CellState::Unknown {
                for (l, s) in labels.iter_mut().zip(self.samples) {
                    *l = s.voxel_labels[idx];
                }
                total += voxel_entropy(&mut labels);
            }
        }
        Ok(total)
    }
}
