//! Prior-driven sampling of plausible completions of the unobserved scene.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellState, OrientedBox, Vec3, VoxelGrid, VoxelIndex};
use crate::rng::{rng_for, SimRng};
use crate::scene_model::SceneGraph;
use crate::simulator::{Aabb, Vocabulary};

const BUILTIN_PRIORS: &str = include_str!("../../assets/priors.json");
pub const PRIORS_FORMAT_VERSION: u32 = 1;
/// Unknown components smaller than this many voxels are ignored.
pub const MIN_COMPONENT_VOXELS: usize = 27;
const PLACEMENT_TRIES: usize = 30;
const SAMPLER_STREAM: u64 = 0xC0A1E7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomPrior {
    pub prior: f64,
    pub count_range: [usize; 2],
    /// Relative frequency of each label in this room type.
    pub labels: BTreeMap<String, f64>,
}

/// Room-type priors, label co-occurrence weights and typical object sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub format_version: u32,
    /// Additive smoothing applied to every label weight.
    pub smoothing: f64,
    pub rooms: BTreeMap<String, RoomPrior>,
    /// Full extents `[x, y, z]` per label, meters.
    pub label_sizes: BTreeMap<String, [f64; 3]>,
}

impl Priors {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_PRIORS, "<builtin priors>").expect("builtin priors are valid")
    }

    pub fn parse(text: &str, origin: impl AsRef<Path>) -> Result<Self> {
        let p: Priors = serde_json::from_str(text).map_err(|e| match Error::parse(origin.as_ref(), text, e) {
            Error::Parse {
                path,
                line,
                column,
                message,
                context,
            } => Error::Configuration(format!("{path}:{line}:{column}: {message}\n    {context}")),
            other => other,
        })?;
        p.check()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Configuration(format!("cannot read priors file {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if self.format_version != PRIORS_FORMAT_VERSION {
            return bad(format!("unsupported priors format_version {}", self.format_version));
        }
        if !(self.smoothing >= 0.0) {
            return bad("priors smoothing must be non-negative".into());
        }
        if self.rooms.is_empty() {
            return bad("priors define no room types".into());
        }
        for (name, r) in &self.rooms {
            if !(r.prior > 0.0) {
                return bad(format!("room '{name}' needs a positive prior"));
            }
            if r.count_range[0] > r.count_range[1] {
                return bad(format!("room '{name}' has an empty count range"));
            }
            if r.labels.is_empty() || r.labels.values().any(|w| !(*w > 0.0)) {
                return bad(format!("room '{name}' needs positive label weights"));
            }
            for l in r.labels.keys() {
                match self.label_sizes.get(l) {
                    Some(s) if s.iter().all(|v| *v > 0.0) => {}
                    _ => return bad(format!("label '{l}' lacks a positive size")),
                }
            }
        }
        Ok(())
    }

    /// Checks that every label is part of `vocabulary`.
    pub fn validate(&self, vocabulary: &Vocabulary) -> Result<()> {
        for r in self.rooms.values() {
            if let Some(l) = r.labels.keys().find(|l| !vocabulary.contains(l)) {
                return Err(Error::Configuration(format!(
                    "priors label '{l}' is not in the vocabulary"
                )));
            }
        }
        Ok(())
    }

    /// Distinct labels across all room types.
    fn alphabet_size(&self) -> usize {
        let mut all: Vec<&String> = self.rooms.values().flat_map(|r| r.labels.keys()).collect();
        all.sort();
        all.dedup();
        all.len()
    }

    /// Smoothed `p(label | room)`.
    pub fn cooccurrence(&self, label: &str, room: &str) -> f64 {
        let Some(r) = self.rooms.get(room) else {
            return 0.0;
        };
        let total: f64 = r.labels.values().sum();
        let w = r.labels.get(label).copied().unwrap_or(0.0);
        let n = self.alphabet_size() as f64;
        let denom = total + self.smoothing * n;
        if denom > 0.0 {
            (w + self.smoothing) / denom
        } else {
            0.0
        }
    }
}

/// Naive-Bayes room-type posterior given observed labels:
/// `p(room) * prod_l p(l | room)`, normalized, in room-name order.
pub fn room_posterior(priors: &Priors, labels: &[&str]) -> Vec<(String, f64)> {
    let logs: Vec<(String, f64)> = priors
        .rooms
        .iter()
        .map(|(name, r)| {
            let lp = r.prior.ln() + labels.iter().map(|l| priors.cooccurrence(l, name).ln()).sum::<f64>();
            (name.clone(), lp)
        })
        .collect();
    let max = logs.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // every room is impossible; fall back to the prior
        let total: f64 = priors.rooms.values().map(|r| r.prior).sum();
        return priors.rooms.iter().map(|(n, r)| (n.clone(), r.prior / total)).collect();
    }
    let z: f64 = logs.iter().map(|(_, l)| (l - max).exp()).sum();
    logs.into_iter().map(|(n, l)| (n, (l - max).exp() / z)).collect()
}

/// Connected (6-neighborhood) region of unknown voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownComponent {
    /// Ascending voxel indices.
    pub voxels: Vec<VoxelIndex>,
    pub min: Vec3,
    pub max: Vec3,
}

/// Unknown components with at least `min_voxels` voxels, ordered by their
/// smallest voxel index.
pub fn unknown_components(grid: &VoxelGrid, min_voxels: usize) -> Vec<UnknownComponent> {
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    let res = grid.resolution();
    for start in 0..grid.len() {
        if seen[start] || grid.state(start) != CellState::Unknown {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut voxels = Vec::new();
        while let Some(v) = queue.pop_front() {
            voxels.push(v);
            for n in grid.neighbors6(v) {
                if !seen[n] && grid.state(n) == CellState::Unknown {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        if voxels.len() < min_voxels {
            continue;
        }
        voxels.sort_unstable();
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for &v in &voxels {
            let c = grid.voxel_center(v);
            min = min.inf(&(c - Vec3::repeat(0.5 * res)));
            max = max.sup(&(c + Vec3::repeat(0.5 * res)));
        }
        out.push(UnknownComponent { voxels, min, max });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesizedObject {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
}

/// One hypothesized full scene. Hypothesized objects occupy only voxels
/// that are unknown in the real grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionSample {
    pub hypothesized_objects: Vec<HypothesizedObject>,
    /// The real grid with hypothesized object voxels marked occupied.
    pub derived_occupancy: Vec<CellState>,
    /// Per voxel: 0 for no hypothesized object, else 1 + vocabulary index
    /// of the covering object's label.
    pub voxel_labels: Vec<u16>,
    /// Room type drawn for each unknown component (empty for samples that
    /// did not come from the built-in sampler).
    pub room_types: Vec<String>,
}

/// Visits the voxels whose centers lie strictly inside `b` until `visit`
/// returns `false`; returns whether the visit ran to completion.
fn visit_covered(grid: &VoxelGrid, b: &OrientedBox, mut visit: impl FnMut(VoxelIndex) -> bool) -> bool {
    let (lo, hi) = b.aabb();
    let [dx, dy, dz] = grid.dims();
    let res = grid.resolution();
    let o = grid.origin();
    let range = |l: f64, h: f64, oa: f64, n: usize| {
        let a = ((l - oa) / res - 0.5).ceil().max(0.0) as usize;
        let b = (((h - oa) / res - 0.5).floor()).min(n as f64 - 1.0);
        if b < 0.0 {
            (1, 0)
        } else {
            (a, b as usize)
        }
    };
    let (x0, x1) = range(lo.x, hi.x, o.x, dx);
    let (y0, y1) = range(lo.y, hi.y, o.y, dy);
    let (z0, z1) = range(lo.z, hi.z, o.z, dz);
    let half = b.extents * 0.5;
    for k in z0..=z1.min(dz.saturating_sub(1)) {
        for j in y0..=y1.min(dy.saturating_sub(1)) {
            for i in x0..=x1.min(dx.saturating_sub(1)) {
                let idx = grid.linear([i, j, k]);
                let l = b.to_local(&grid.voxel_center(idx));
                if (0..3).all(|a| l[a].abs() < half[a] - 1e-9) && !visit(idx) {
                    return false;
                }
            }
        }
    }
    true
}

/// Voxels whose centers lie strictly inside `b`.
pub(crate) fn covered_voxels(grid: &VoxelGrid, b: &OrientedBox) -> Vec<VoxelIndex> {
    let mut out = Vec::new();
    visit_covered(grid, b, |idx| {
        out.push(idx);
        true
    });
    out.sort_unstable();
    out
}

impl CompletionSample {
    /// Builds a sample from object hypotheses, dropping any object that
    /// covers no voxel, covers a known voxel, overlaps an earlier
    /// hypothesis, or carries a label outside `vocabulary`.
    pub fn from_objects(
        grid: &VoxelGrid,
        objects: Vec<HypothesizedObject>,
        room_types: Vec<String>,
        vocabulary: &Vocabulary,
    ) -> Self {
        let mut derived = grid.cells().to_vec();
        let mut labels = vec![0u16; grid.len()];
        let mut kept = Vec::new();
        for o in objects {
            let Some(code) = vocabulary.labels().iter().position(|l| *l == o.label) else {
                log::warn!("dropping hypothesized object with unknown label '{}'", o.label);
                continue;
            };
            let cov = covered_voxels(grid, &o.bbox);
            if cov.is_empty() || cov.iter().any(|&v| derived[v] != CellState::Unknown) {
                continue;
            }
            for &v in &cov {
                derived[v] = CellState::Occupied;
                labels[v] = (code + 1) as u16;
            }
            kept.push(o);
        }
        Self {
            hypothesized_objects: kept,
            derived_occupancy: derived,
            voxel_labels: labels,
            room_types,
        }
    }

    /// Checks that the sample agrees with `grid` on every known voxel.
    pub fn preserves_observations(&self, grid: &VoxelGrid) -> bool {
        grid.cells()
            .iter()
            .zip(&self.derived_occupancy)
            .all(|(g, d)| *g == CellState::Unknown || g == d)
    }
}

/// Inputs shared by all samplers.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub graph: &'a SceneGraph,
    pub grid: &'a VoxelGrid,
    pub bounds: Aabb,
    /// Height hypothesized objects rest on.
    pub floor_height: f64,
    pub num_samples: usize,
    pub seed: u64,
}

fn draw_weighted<'a>(rng: &mut SimRng, items: impl Iterator<Item = (&'a String, f64)> + Clone) -> &'a String {
    let total: f64 = items.clone().map(|(_, w)| w).sum();
    let mut u = rng.random_range(0.0..total);
    let mut last = None;
    for (name, w) in items {
        if u < w {
            return name;
        }
        u -= w;
        last = Some(name);
    }
    last.expect("non-empty weights")
}

/// Built-in sampler. For every unknown component a room type is drawn from
/// the naive-Bayes posterior over the graph's node labels, then objects are
/// drawn from that room's count range and label weights and placed
/// floor-snapped by rejection sampling into unknown voxels. Randomness is
/// keyed on `(seed, component index, sample index)`.
pub fn sample_completions(
    req: &CompletionRequest<'_>,
    priors: &Priors,
    vocabulary: &Vocabulary,
) -> Result<Vec<CompletionSample>> {
    if req.num_samples == 0 {
        return Err(crate::error::invalid("at least one completion sample is required"));
    }
    let grid = req.grid;
    let components = unknown_components(grid, MIN_COMPONENT_VOXELS);
    let node_labels: Vec<String> = req.graph.nodes().map(|n| n.label().to_string()).collect();
    let refs: Vec<&str> = node_labels.iter().map(String::as_str).collect();
    let posterior = room_posterior(priors, &refs);

    let mut samples = Vec::with_capacity(req.num_samples);
    for s in 0..req.num_samples {
        let mut objects: Vec<HypothesizedObject> = Vec::new();
        let mut taken = vec![false; grid.len()];
        let mut room_types = Vec::with_capacity(components.len());
        for (c, comp) in components.iter().enumerate() {
            let mut rng = rng_for(&[req.seed, c as u64, s as u64, SAMPLER_STREAM]);
            let room = draw_weighted(&mut rng, posterior.iter().map(|(n, p)| (n, *p))).clone();
            let rp = &priors.rooms[&room];
            let count = rng.random_range(rp.count_range[0]..=rp.count_range[1]);
            for _ in 0..count {
                let label = draw_weighted(&mut rng, rp.labels.iter().map(|(l, w)| (l, *w))).clone();
                let size = priors.label_sizes[&label];
                for _ in 0..PLACEMENT_TRIES {
                    let ext = Vec3::new(
                        size[0] * rng.random_range(0.85..1.15),
                        size[1] * rng.random_range(0.85..1.15),
                        size[2] * rng.random_range(0.85..1.15),
                    );
                    let yaw = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
                    let v = comp.voxels[rng.random_range(0..comp.voxels.len())];
                    let c0 = grid.voxel_center(v);
                    let half = 0.5 * grid.resolution();
                    let center = Vec3::new(
                        c0.x + rng.random_range(-half..half),
                        c0.y + rng.random_range(-half..half),
                        req.floor_height + 0.5 * ext.z,
                    );
                    let b = OrientedBox::new(center, yaw, ext);
                    if !req.bounds.contains_box(&b, 0.0) {
                        continue;
                    }
                    // cheap rejection pass before collecting the covered voxels
                    let mut covers_any = false;
                    let fits = visit_covered(grid, &b, |v| {
                        covers_any = true;
                        !taken[v] && grid.state(v) == CellState::Unknown
                    });
                    if !fits || !covers_any {
                        continue;
                    }
                    let cov = covered_voxels(grid, &b);
                    for &v in &cov {
                        taken[v] = true;
                    }
                    objects.push(HypothesizedObject { label, bbox: b });
                    break;
                }
            }
            room_types.push(room);
        }
        samples.push(CompletionSample::from_objects(grid, objects, room_types, vocabulary));
    }
    Ok(samples)
}
