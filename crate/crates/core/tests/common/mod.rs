//! Independent oracles shared by the integration and acceptance tests.
//!
//! Everything here is written from the rule text rather than from the
//! library internals, so agreement between the two is meaningful.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use activesg::evaluation::{
    candidate_pairs, compute_metrics, greedy_match, match_objects, MatchThresholds, PredictedObject, TruthObject,
};
use activesg::exploration::{info_gain, CompletionSample, HypothesizedObject};
use activesg::geometry::{
    box_iou, footprint_overlap, visible_cells, CameraModel, CellState, OrientedBox, Pose, Vec2, Vec3, VoxelGrid,
};
use activesg::relations::{evaluate_boxes, infer_edges, RelationThresholds};
use activesg::scene_model::{embed_label, Embedder, NodeId, Predicate, SceneGraph, SemanticEmbedding};
use activesg::simulator::{
    generate_scene, navigable_viewpoints, render_batch, NoiseModel, SceneRaycaster, SceneTemplate, Vocabulary,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Geometry

/// Largest distance between composed points and ray-cast surface points over
/// `views` random noise-free views (batches of one to three views).
pub fn backprojection_max_error(views: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let scenes: Vec<_> = [
        (SceneTemplate::FurnishedRoom, 0),
        (SceneTemplate::FurnishedRoom, 1),
        (SceneTemplate::Apartment, 0),
    ]
    .into_iter()
    .map(|(t, s)| generate_scene(t, s).unwrap())
    .collect();
    let camera = CameraModel {
        width: 24,
        height: 18,
        ..CameraModel::default()
    };
    let rays = camera.rays();
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut batch_size = 1;
    while done < views {
        let scene = &scenes[done % scenes.len()];
        let vps = navigable_viewpoints(scene, 0.5, 8).unwrap();
        let n = batch_size.min(views - done);
        batch_size = batch_size % 3 + 1;
        let poses: Vec<Pose> = (0..n)
            .map(|_| {
                let v = vps.viewpoints[r.random_range(0..vps.len())].position();
                Pose::look(v, r.random_range(-PI..PI), r.random_range(-0.5..0.6))
            })
            .collect();
        let batch = render_batch(scene, &poses, &camera, &NoiseModel::noise_free(), seed, done as u64).unwrap();
        let estimated = batch.estimated_poses().unwrap();
        let caster = SceneRaycaster::new(scene);
        for ((view, est), truth) in batch.views.iter().zip(&estimated).zip(&poses) {
            for (p, ray) in rays.iter().enumerate() {
                let dir = truth.transform_vector(ray);
                let hit = caster.cast(&truth.translation, &dir, camera.max_range);
                assert_eq!(
                    view.factored.valid_mask[p],
                    hit.is_some(),
                    "validity differs at pixel {p}"
                );
                if let Some(h) = hit {
                    let expected = truth.translation + dir * h.t;
                    let got = est.transform_point(&view.factored.camera_point(p));
                    worst = worst.max((got - expected).norm());
                }
            }
            done += 1;
        }
    }
    worst
}

pub fn random_box(r: &mut ChaCha8Rng, around: Option<&OrientedBox>) -> OrientedBox {
    let center = match around {
        Some(b) => {
            b.center
                + Vec3::new(
                    r.random_range(-0.6..0.6),
                    r.random_range(-0.6..0.6),
                    r.random_range(-0.4..0.4),
                )
        }
        None => Vec3::new(
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(0.0..1.0),
        ),
    };
    OrientedBox::new(
        center,
        r.random_range(-PI..PI),
        Vec3::new(
            r.random_range(0.3..1.5),
            r.random_range(0.3..1.5),
            r.random_range(0.3..1.5),
        ),
    )
}

fn sample_in(b: &OrientedBox, r: &mut ChaCha8Rng) -> Vec3 {
    let local = Vec3::new(
        (r.random::<f64>() - 0.5) * b.extents.x,
        (r.random::<f64>() - 0.5) * b.extents.y,
        (r.random::<f64>() - 0.5) * b.extents.z,
    );
    let (s, c) = b.yaw.sin_cos();
    b.center + Vec3::new(c * local.x - s * local.y, s * local.x + c * local.y, local.z)
}

fn inside(b: &OrientedBox, p: &Vec3) -> bool {
    let d = p - b.center;
    let (s, c) = b.yaw.sin_cos();
    let lx = c * d.x + s * d.y;
    let ly = -s * d.x + c * d.y;
    lx.abs() <= 0.5 * b.extents.x && ly.abs() <= 0.5 * b.extents.y && d.z.abs() <= 0.5 * b.extents.z
}

fn inside_footprint(b: &OrientedBox, p: &Vec3) -> bool {
    let q = Vec3::new(p.x, p.y, b.center.z);
    inside(b, &q)
}

/// Monte-Carlo estimates `(iou, footprint_overlap)` from `samples` uniform
/// draws inside the smaller box (resp. footprint).
pub fn monte_carlo_overlaps(a: &OrientedBox, b: &OrientedBox, samples: usize, r: &mut ChaCha8Rng) -> (f64, f64) {
    let vol = |x: &OrientedBox| x.extents.x * x.extents.y * x.extents.z;
    let (small, big) = if vol(a) <= vol(b) { (a, b) } else { (b, a) };
    let hits = (0..samples).filter(|_| inside(big, &sample_in(small, r))).count();
    let inter = hits as f64 / samples as f64 * vol(small);
    let iou = inter / (vol(a) + vol(b) - inter);

    let area = |x: &OrientedBox| x.extents.x * x.extents.y;
    let (small, big) = if area(a) <= area(b) { (a, b) } else { (b, a) };
    let hits = (0..samples)
        .filter(|_| inside_footprint(big, &sample_in(small, r)))
        .count();
    (iou, hits as f64 / samples as f64)
}

/// Largest deviation of `box_iou` / `footprint_overlap` from the
/// Monte-Carlo oracle over `pairs` random overlapping box pairs.
pub fn overlap_max_errors(pairs: usize, samples: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let (mut e_iou, mut e_fp): (f64, f64) = (0.0, 0.0);
    for _ in 0..pairs {
        let a = random_box(&mut r, None);
        let b = random_box(&mut r, Some(&a));
        let (iou, fp) = monte_carlo_overlaps(&a, &b, samples, &mut r);
        e_iou = e_iou.max((box_iou(&a, &b) - iou).abs());
        e_fp = e_fp.max((footprint_overlap(&a, &b) - fp).abs());
    }
    (e_iou, e_fp)
}

/// Exhaustive per-ray traversal: every voxel whose slab interval meets the
/// ray within range, ordered by entry distance, up to the first occupied.
pub fn visible_cells_oracle(
    grid: &VoxelGrid,
    pose: &Pose,
    camera: &CameraModel,
    states: &[CellState],
) -> Vec<(usize, CellState)> {
    let mut seen = BTreeSet::new();
    let o = pose.translation;
    for ray in camera.rays() {
        let d = pose.transform_vector(&ray);
        let mut hits = Vec::new();
        for idx in 0..grid.len() {
            let c = grid.coords(idx);
            let lo = grid.origin() + Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * grid.resolution();
            let hi = lo + Vec3::repeat(grid.resolution());
            let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
            for a in 0..3 {
                if d[a] == 0.0 {
                    if o[a] < lo[a] || o[a] >= hi[a] {
                        t0 = f64::INFINITY;
                    }
                    continue;
                }
                let (ta, tb) = ((lo[a] - o[a]) / d[a], (hi[a] - o[a]) / d[a]);
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
            let entry = t0.max(0.0);
            if t1 > entry && entry < camera.max_range {
                hits.push((entry, idx));
            }
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, idx) in hits {
            seen.insert(idx);
            if states[idx] == CellState::Occupied {
                break;
            }
        }
    }
    seen.into_iter().map(|i| (i, states[i])).collect()
}

/// Number of (grid, pose, override) cases where `visible_cells` differs from
/// the exhaustive oracle on 5×5×5 grids, and the number of cases checked.
pub fn visible_cells_mismatches(seed: u64) -> (usize, usize) {
    let mut r = rng(seed);
    let camera = CameraModel {
        horizontal_fov: 1.4,
        width: 8,
        height: 8,
        max_range: 3.5,
    };
    let states = [CellState::Unknown, CellState::Free, CellState::Occupied];
    let mut grids = Vec::new();
    for occupied in 0..125 {
        let mut g = VoxelGrid::new(Vec3::zeros(), 1.0, [5, 5, 5]).unwrap();
        g.mark(occupied, CellState::Occupied);
        grids.push(g);
    }
    for _ in 0..40 {
        let mut g = VoxelGrid::new(Vec3::zeros(), 1.0, [5, 5, 5]).unwrap();
        for i in 0..g.len() {
            let s = if r.random_bool(0.15) {
                CellState::Occupied
            } else {
                states[r.random_range(0..2)]
            };
            g.mark(i, s);
        }
        grids.push(g);
    }
    let (mut bad, mut total) = (0, 0);
    for g in &grids {
        for k in 0..3 {
            let pos = Vec3::new(
                r.random_range(0.2..4.8),
                r.random_range(0.2..4.8),
                r.random_range(0.2..4.8),
            );
            let pose = Pose::look(pos, r.random_range(-PI..PI), r.random_range(-1.0..1.0));
            let over: Option<Vec<CellState>> =
                (k == 2).then(|| (0..g.len()).map(|_| states[r.random_range(0..3)]).collect());
            let effective = over.as_deref().unwrap_or(g.cells());
            let got = visible_cells(g, &pose, &camera, over.as_deref()).unwrap();
            total += 1;
            if got != visible_cells_oracle(g, &pose, &camera, effective) {
                bad += 1;
            }
        }
    }
    (bad, total)
}

// ---------------------------------------------------------------------------
// Relations

fn corners2(b: &OrientedBox) -> Vec<Vec2> {
    let (s, c) = b.yaw.sin_cos();
    let (hx, hy) = (0.5 * b.extents.x, 0.5 * b.extents.y);
    [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
        .iter()
        .map(|&(x, y)| Vec2::new(b.center.x + c * x - s * y, b.center.y + s * x + c * y))
        .collect()
}

fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn shoelace(p: &[Vec2]) -> f64 {
    let n = p.len();
    (0..n).map(|i| cross(&p[i], &p[(i + 1) % n])).sum::<f64>().abs() * 0.5
}

/// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise `clip`.
fn clip(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let side = |p: &Vec2| cross(&(b - a), &(p - a));
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(&p), side(&q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                out.push(p + (q - p) * (sp / (sp - sq)));
            }
        }
        if out.is_empty() {
            break;
        }
    }
    out
}

fn fp_area(b: &OrientedBox) -> f64 {
    b.extents.x * b.extents.y
}

fn inter_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let p = clip(&corners2(a), &corners2(b));
    if p.len() < 3 {
        0.0
    } else {
        shoelace(&p)
    }
}

fn zmin(b: &OrientedBox) -> f64 {
    b.center.z - 0.5 * b.extents.z
}

fn zmax(b: &OrientedBox) -> f64 {
    b.center.z + 0.5 * b.extents.z
}

fn v_overlap(a: &OrientedBox, b: &OrientedBox) -> f64 {
    (zmax(a).min(zmax(b)) - zmin(a).max(zmin(b))).max(0.0)
}

fn seg_dist(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

fn segments_cross(p1: &Vec2, p2: &Vec2, q1: &Vec2, q2: &Vec2) -> bool {
    let d1 = cross(&(p2 - p1), &(q1 - p1));
    let d2 = cross(&(p2 - p1), &(q2 - p1));
    let d3 = cross(&(q2 - q1), &(p1 - q1));
    let d4 = cross(&(q2 - q1), &(p2 - q1));
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

fn point_in_convex(p: &Vec2, poly: &[Vec2]) -> bool {
    (0..poly.len()).all(|i| cross(&(poly[(i + 1) % poly.len()] - poly[i]), &(p - poly[i])) >= 0.0)
}

fn gap(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let (pa, pb) = (corners2(a), corners2(b));
    let touching = (0..4).any(|i| (0..4).any(|j| segments_cross(&pa[i], &pa[(i + 1) % 4], &pb[j], &pb[(j + 1) % 4])))
        || pa.iter().any(|p| point_in_convex(p, &pb))
        || pb.iter().any(|p| point_in_convex(p, &pa));
    if touching {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (p, q) in [(&pa, &pb), (&pb, &pa)] {
        for v in p.iter() {
            for i in 0..4 {
                best = best.min(seg_dist(v, &q[i], &q[(i + 1) % 4]));
            }
        }
    }
    best
}

/// The predicate rules, applied literally in priority order.
pub fn brute_force_predicate(a: &OrientedBox, b: &OrientedBox, th: &RelationThresholds) -> Option<Predicate> {
    let vol = |x: &OrientedBox| fp_area(x) * x.extents.z;
    let ivol = |x: &OrientedBox, y: &OrientedBox| inter_area(x, y) * v_overlap(x, y);
    let fp_overlap = |x: &OrientedBox, y: &OrientedBox| inter_area(x, y) / fp_area(x).min(fp_area(y));
    let contained = |x: &OrientedBox, y: &OrientedBox| ivol(x, y) / vol(x);
    let on_top = |x: &OrientedBox, y: &OrientedBox| {
        let g = zmin(x) - zmax(y);
        -th.contact_gap <= g
            && g <= th.contact_gap
            && fp_overlap(x, y) >= th.min_footprint_overlap
            && contained(x, y) <= th.on_top_containment_cap
    };
    let under = |x: &OrientedBox, y: &OrientedBox| {
        let g = zmin(y) - zmax(x);
        zmax(x) < zmin(y)
            && g > th.contact_gap
            && g <= th.max_vertical_gap
            && fp_overlap(x, y) >= th.min_footprint_overlap
    };
    let is_inside = |x: &OrientedBox, y: &OrientedBox| contained(x, y) >= th.inside_fraction && vol(x) <= vol(y);
    if on_top(a, b) {
        return Some(Predicate::OnTopOf);
    }
    if on_top(b, a) {
        return Some(Predicate::Supports);
    }
    if under(a, b) {
        return Some(Predicate::Under);
    }
    if under(b, a) {
        return Some(Predicate::Over);
    }
    if is_inside(a, b) {
        return Some(Predicate::Inside);
    }
    // containers and their contents are not "next to" each other in either
    // direction, which keeps next_to symmetric
    let near = gap(a, b) <= th.near_distance
        && v_overlap(a, b) / a.extents.z.min(b.extents.z) >= th.min_height_interval_overlap;
    if near && !is_inside(b, a) {
        return Some(Predicate::NextTo);
    }
    None
}

/// Ten boxes arranged like furniture with items resting on, above, inside
/// and beside it, plus a few strays.
pub fn relation_scene(seed: u64) -> Vec<OrientedBox> {
    let mut r = rng(seed);
    let mut boxes = Vec::new();
    let furniture = 3;
    for _ in 0..furniture {
        let ext = Vec3::new(
            r.random_range(0.5..1.6),
            r.random_range(0.4..1.0),
            r.random_range(0.4..1.1),
        );
        let c = Vec3::new(r.random_range(-1.5..1.5), r.random_range(-1.5..1.5), 0.5 * ext.z);
        boxes.push(OrientedBox::new(c, r.random_range(-PI..PI), ext));
    }
    while boxes.len() < 10 {
        let base = boxes[r.random_range(0..furniture)];
        let ext = Vec3::new(
            r.random_range(0.08..0.45),
            r.random_range(0.08..0.45),
            r.random_range(0.05..0.4),
        );
        let (s, c) = base.yaw.sin_cos();
        let (u, v) = (
            r.random_range(-0.5..0.5) * base.extents.x,
            r.random_range(-0.5..0.5) * base.extents.y,
        );
        let xy = base.center + Vec3::new(c * u - s * v, s * u + c * v, 0.0);
        let yaw = if r.random_bool(0.5) {
            base.yaw
        } else {
            r.random_range(-PI..PI)
        };
        let z = match r.random_range(0..5) {
            // resting, possibly with a small gap or overlap
            0 => zmax(&base) + [0.0, 0.02, -0.03, 0.04][r.random_range(0..4)] + 0.5 * ext.z,
            // hovering above
            1 => zmax(&base) + r.random_range(0.08..0.6) + 0.5 * ext.z,
            // inside
            2 => zmin(&base) + r.random_range(0.0..(base.extents.z - ext.z).max(0.01)) + 0.5 * ext.z,
            // on the floor nearby
            3 => 0.5 * ext.z,
            _ => r.random_range(0.0..1.5),
        };
        let mut center = Vec3::new(xy.x, xy.y, z);
        if r.random_bool(0.3) {
            center += Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), 0.0);
        }
        boxes.push(OrientedBox::new(center, yaw, ext));
    }
    boxes
}

pub fn graph_of(boxes: &[OrientedBox]) -> SceneGraph {
    let mut g = SceneGraph::new();
    let emb = embed_label("chair", 8, 0).unwrap();
    for b in boxes {
        g.insert_node(
            BTreeMap::from([("chair".to_string(), 1)]),
            emb.clone(),
            vec![b.center],
            *b,
        )
        .unwrap();
    }
    g
}

pub fn edge_set(g: &SceneGraph) -> BTreeSet<(NodeId, NodeId, Predicate)> {
    g.edges().map(|e| (e.source_id, e.target_id, e.predicate)).collect()
}

/// Mismatching ordered pairs between `infer_edges` and the brute-force
/// evaluator over `scenes` seeded scenes, and the number of predicates the
/// oracle emitted (to show the scenes exercise the rules).
pub fn relation_mismatches(scenes: u64) -> (usize, BTreeMap<Predicate, usize>) {
    let th = RelationThresholds::default();
    let mut bad = 0;
    let mut seen = BTreeMap::new();
    for seed in 0..scenes {
        let boxes = relation_scene(seed);
        let mut g = graph_of(&boxes);
        infer_edges(&mut g, &th).unwrap();
        let got = edge_set(&g);
        let ids = g.node_ids();
        let mut want = BTreeSet::new();
        for (i, a) in boxes.iter().enumerate() {
            for (j, b) in boxes.iter().enumerate() {
                if i == j {
                    continue;
                }
                if let Some(p) = brute_force_predicate(a, b, &th) {
                    want.insert((ids[i], ids[j], p));
                    *seen.entry(p).or_insert(0) += 1;
                }
            }
        }
        bad += got.symmetric_difference(&want).count();
    }
    (bad, seen)
}

// ---------------------------------------------------------------------------
// Information gain

/// Free 12×3×3 corridor with a single unknown voxel three cells in front of
/// a camera looking down +x.
pub fn single_unknown_voxel() -> (VoxelGrid, Pose, CameraModel, usize) {
    let mut g = VoxelGrid::new(Vec3::zeros(), 0.1, [12, 3, 3]).unwrap();
    let target = g.linear([3, 1, 1]);
    for i in (0..g.len()).filter(|&i| i != target) {
        g.mark(i, CellState::Free);
    }
    let pose = Pose::look(g.voxel_center(g.linear([0, 1, 1])), 0.0, 0.0);
    let camera = CameraModel {
        horizontal_fov: 0.5,
        width: 8,
        height: 8,
        max_range: 1.0,
    };
    (g, pose, camera, target)
}

/// One sample per entry: `Some(label)` puts a small object of that label in
/// the unknown voxel, `None` leaves it empty.
pub fn voxel_samples(grid: &VoxelGrid, voxel: usize, labels: &[Option<&str>]) -> Vec<CompletionSample> {
    let vocab = Vocabulary::builtin();
    labels
        .iter()
        .map(|l| {
            let objs = l
                .map(|label| HypothesizedObject {
                    label: label.to_string(),
                    bbox: OrientedBox::new(grid.voxel_center(voxel), 0.0, Vec3::repeat(0.06)),
                })
                .into_iter()
                .collect();
            CompletionSample::from_objects(grid, objs, Vec::new(), &vocab)
        })
        .collect()
}

pub fn closed_form_info_gain() -> [f64; 3] {
    let (g, pose, cam, v) = single_unknown_voxel();
    let ig = |labels: &[Option<&str>]| info_gain(&pose, &voxel_samples(&g, v, labels), &g, &cam).unwrap();
    [
        ig(&[Some("chair"), Some("chair"), Some("chair")]),
        ig(&[Some("chair"), Some("chair"), Some("desk"), Some("desk")]),
        ig(&[Some("chair"), Some("chair"), Some("desk")]),
    ]
}

/// Checks non-negativity and permutation invariance on `cases` random
/// instances; returns the number of violations.
pub fn info_gain_property_violations(cases: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let vocab = Vocabulary::builtin();
    let labels = vocab.labels().to_vec();
    let camera = CameraModel {
        horizontal_fov: 1.2,
        width: 10,
        height: 8,
        max_range: 1.5,
    };
    let mut bad = 0;
    for _ in 0..cases {
        let mut g = VoxelGrid::new(Vec3::zeros(), 0.1, [10, 10, 6]).unwrap();
        let split = r.random_range(2..8);
        for i in 0..g.len() {
            let c = g.coords(i);
            let s = if c[0] < split {
                if r.random_bool(0.05) {
                    CellState::Occupied
                } else {
                    CellState::Free
                }
            } else if r.random_bool(0.1) {
                CellState::Free
            } else {
                CellState::Unknown
            };
            g.mark(i, s);
        }
        let k = r.random_range(2..7);
        let samples: Vec<CompletionSample> = (0..k)
            .map(|_| {
                let n = r.random_range(0..5);
                let objs = (0..n)
                    .map(|_| HypothesizedObject {
                        label: labels[r.random_range(0..6.min(labels.len()))].clone(),
                        bbox: OrientedBox::new(
                            Vec3::new(
                                r.random_range(0.2..1.0),
                                r.random_range(0.0..1.0),
                                r.random_range(0.0..0.6),
                            ),
                            r.random_range(-PI..PI),
                            Vec3::new(
                                r.random_range(0.1..0.4),
                                r.random_range(0.1..0.4),
                                r.random_range(0.1..0.4),
                            ),
                        ),
                    })
                    .collect();
                CompletionSample::from_objects(&g, objs, Vec::new(), &vocab)
            })
            .collect();
        let start = g.linear([r.random_range(0..split), r.random_range(0..10), r.random_range(0..6)]);
        let pose = Pose::look(
            g.voxel_center(start),
            r.random_range(-1.2..1.2),
            r.random_range(-0.5..0.5),
        );
        let ig = info_gain(&pose, &samples, &g, &camera).unwrap();
        let mut shuffled = samples.clone();
        shuffled.shuffle(&mut r);
        let ig2 = info_gain(&pose, &shuffled, &g, &camera).unwrap();
        if !(ig >= 0.0 && ig.is_finite()) || (ig - ig2).abs() > 1e-9 {
            bad += 1;
        }
    }
    bad
}

// ---------------------------------------------------------------------------
// Evaluation

pub fn hand_derived_metrics() -> (f64, f64, f64) {
    let m = compute_metrics(1, 2, 3).unwrap();
    (m.precision, m.recall, m.f1)
}

fn mixed_embedding(votes: &BTreeMap<String, u32>, embedder: &mut Embedder) -> SemanticEmbedding {
    let mut acc = vec![0.0; embedder.dim()];
    for (label, &n) in votes {
        let e = embedder.embed(label).unwrap();
        for (a, v) in acc.iter_mut().zip(e.values()) {
            *a += n as f64 * v;
        }
    }
    SemanticEmbedding::from_unnormalized(acc).unwrap()
}

/// Sweeps both gates from loose to tight on random instances with
/// vote-mixed node embeddings; returns the number of sweeps in which the
/// match count ever increased.
pub fn gate_monotonicity_violations(instances: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let labels = ["chair", "table", "sofa", "lamp", "cup"];
    let mut embedder = Embedder::new(64, seed);
    let mut bad = 0;
    for _ in 0..instances {
        let pred: Vec<PredictedObject> = (0..r.random_range(0..8))
            .map(|i| {
                let mut votes = BTreeMap::new();
                for _ in 0..r.random_range(1..4) {
                    *votes
                        .entry(labels[r.random_range(0..labels.len())].to_string())
                        .or_insert(0) += 1;
                }
                PredictedObject {
                    id: i as NodeId,
                    embedding: mixed_embedding(&votes, &mut embedder),
                    center: Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), 0.0),
                }
            })
            .collect();
        let gt: Vec<TruthObject> = (0..r.random_range(1..8))
            .map(|_| TruthObject {
                embedding: embedder.embed(labels[r.random_range(0..labels.len())]).unwrap(),
                center: Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), 0.0),
            })
            .collect();
        // a random monotone path through threshold space
        let mut sem: Vec<f64> = (0..12).map(|_| r.random_range(0.05..1.0)).collect();
        let mut dist: Vec<f64> = (0..12).map(|_| r.random_range(0.01..2.0)).collect();
        sem.sort_by(f64::total_cmp);
        dist.sort_by(|a, b| b.total_cmp(a));
        let mut last = usize::MAX;
        for (s, d) in sem.iter().zip(&dist) {
            let th = MatchThresholds {
                min_semantic: *s,
                max_centroid_dist: *d,
            };
            let n = match_objects(&pred, &gt, &th).unwrap().len();
            if n > last {
                bad += 1;
                break;
            }
            last = n;
        }
    }
    bad
}

#[derive(Debug, Deserialize)]
pub struct FixturePred {
    pub id: NodeId,
    pub votes: BTreeMap<String, u32>,
    pub center: [f64; 3],
}

#[derive(Debug, Deserialize)]
pub struct FixtureTruth {
    pub label: String,
    pub center: [f64; 3],
}

#[derive(Debug, Deserialize)]
pub struct MatchingFixture {
    pub name: String,
    pub pred: Vec<FixturePred>,
    pub gt: Vec<FixtureTruth>,
    pub expected_matches: usize,
}

pub fn load_fixtures() -> Vec<MatchingFixture> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/matching");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap())
        .collect()
}

/// Largest one-to-one matching by exhaustive search.
pub fn exhaustive_optimum(edges: &[(NodeId, usize)]) -> usize {
    fn go(edges: &[(NodeId, usize)], used_p: &mut Vec<NodeId>, used_g: &mut Vec<usize>) -> usize {
        let Some((&(p, g), rest)) = edges.split_first() else {
            return 0;
        };
        let skip = go(rest, used_p, used_g);
        if used_p.contains(&p) || used_g.contains(&g) {
            return skip;
        }
        used_p.push(p);
        used_g.push(g);
        let take = 1 + go(rest, used_p, used_g);
        used_p.pop();
        used_g.pop();
        skip.max(take)
    }
    go(edges, &mut Vec::new(), &mut Vec::new())
}

/// For each fixture: (name, greedy count, match_objects count, optimum, expected).
pub fn fixture_results() -> Vec<(String, usize, usize, usize, usize)> {
    let th = MatchThresholds::default();
    load_fixtures()
        .into_iter()
        .map(|f| {
            assert!(f.pred.len() <= 6 && f.gt.len() <= 6, "fixture {} is too large", f.name);
            let mut embedder = Embedder::new(64, 0);
            let pred: Vec<PredictedObject> = f
                .pred
                .iter()
                .map(|p| PredictedObject {
                    id: p.id,
                    embedding: mixed_embedding(&p.votes, &mut embedder),
                    center: Vec3::from(p.center),
                })
                .collect();
            let gt: Vec<TruthObject> =
                f.gt.iter()
                    .map(|t| TruthObject {
                        embedding: embedder.embed(&t.label).unwrap(),
                        center: Vec3::from(t.center),
                    })
                    .collect();
            let cands = candidate_pairs(&pred, &gt, &th).unwrap();
            let edges: Vec<_> = cands.iter().map(|c| (c.pred, c.gt)).collect();
            (
                f.name,
                greedy_match(cands).len(),
                match_objects(&pred, &gt, &th).unwrap().len(),
                exhaustive_optimum(&edges),
                f.expected_matches,
            )
        })
        .collect()
}

fn dual(p: Predicate) -> Option<Predicate> {
    match p {
        Predicate::OnTopOf => Some(Predicate::Supports),
        Predicate::Supports => Some(Predicate::OnTopOf),
        Predicate::Under => Some(Predicate::Over),
        Predicate::Over => Some(Predicate::Under),
        Predicate::NextTo => Some(Predicate::NextTo),
        Predicate::Inside => None,
    }
}

fn moved(b: &OrientedBox, angle: f64, shift: Vec3) -> OrientedBox {
    let (s, c) = angle.sin_cos();
    let p = b.center;
    OrientedBox::new(
        Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z) + shift,
        b.yaw + angle,
        b.extents,
    )
}

/// Duality, next_to symmetry, and translation/yaw invariance over every
/// ordered pair of `scenes` seeded scenes. Returns (violations, pairs).
pub fn relation_property_violations(scenes: u64) -> (usize, usize) {
    let th = RelationThresholds::default();
    let mut r = rng(scenes);
    let (mut bad, mut pairs) = (0, 0);
    for seed in 0..scenes {
        let boxes = relation_scene(seed);
        let angle = r.random_range(-PI..PI);
        let shift = Vec3::new(
            r.random_range(-5.0..5.0),
            r.random_range(-5.0..5.0),
            r.random_range(-1.0..1.0),
        );
        for (i, a) in boxes.iter().enumerate() {
            for (j, b) in boxes.iter().enumerate() {
                if i == j {
                    continue;
                }
                pairs += 1;
                let fwd = evaluate_boxes(a, b, &th);
                let back = evaluate_boxes(b, a, &th);
                let dual_ok = fwd.and_then(dual).is_none_or(|d| back == Some(d));
                let sym_ok = (fwd == Some(Predicate::NextTo)) == (back == Some(Predicate::NextTo));
                let moved_ok = fwd == evaluate_boxes(&moved(a, angle, shift), &moved(b, angle, shift), &th);
                if !(dual_ok && sym_ok && moved_ok) {
                    bad += 1;
                }
            }
        }
    }
    (bad, pairs)
}
