//! Incremental fusion of per-frame detections into persistent object nodes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{box_iou, fit_oriented_box, Pose, Vec3};
use crate::scene_model::{cosine_similarity, Detection, NodeId, ObjectNode, SceneGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssociationThresholds {
    pub min_cosine: f64,
    pub min_iou: f64,
    pub consolidate_iou: f64,
    pub downsample_leaf: f64,
}

impl Default for AssociationThresholds {
    fn default() -> Self {
        Self {
            min_cosine: 0.75,
            min_iou: 0.20,
            consolidate_iou: 0.40,
            downsample_leaf: 0.05,
        }
    }
}

impl AssociationThresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("min_cosine", self.min_cosine),
            ("min_iou", self.min_iou),
            ("consolidate_iou", self.consolidate_iou),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1]")));
            }
        }
        if !(self.downsample_leaf > 0.0) {
            return Err(invalid("downsample_leaf must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    Merged(NodeId),
    New(NodeId),
}

impl Assignment {
    pub fn node_id(&self) -> NodeId {
        match *self {
            Assignment::Merged(id) | Assignment::New(id) => id,
        }
    }
}

/// Replaces the points in each cubic leaf by their centroid. Output is
/// ordered by leaf key.
pub fn voxel_downsample(points: &[Vec3], leaf: f64) -> Vec<Vec3> {
    let mut cells: BTreeMap<[i64; 3], (Vec3, usize)> = BTreeMap::new();
    for p in points {
        let key = [
            (p.x / leaf).floor() as i64,
            (p.y / leaf).floor() as i64,
            (p.z / leaf).floor() as i64,
        ];
        let e = cells.entry(key).or_insert((Vec3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    cells
        .into_values()
        .map(|(sum, n)| if n == 1 { sum } else { sum / n as f64 })
        .collect()
}

fn absorb(
    node: &mut ObjectNode,
    labels: &BTreeMap<String, u32>,
    embedding: &crate::scene_model::SemanticEmbedding,
    count: u32,
    points: &[Vec3],
    leaf: f64,
) -> Result<()> {
    node.embedding = node
        .embedding
        .weighted_mean(node.detection_count as f64, embedding, count as f64);
    for (l, c) in labels {
        *node.label_votes.entry(l.clone()).or_insert(0) += c;
    }
    node.detection_count += count;
    let mut all = std::mem::take(&mut node.points);
    all.extend_from_slice(points);
    node.points = voxel_downsample(&all, leaf);
    node.bbox = fit_oriented_box(&node.points)?;
    Ok(())
}

/// Merges each detection into the existing node with the highest cosine
/// similarity among nodes passing both the IoU and cosine gates, or opens a
/// new node. Nodes created within this call are not merge candidates.
/// Detections are handled in input order; `graph.step` is left unchanged.
pub fn associate_detections(
    graph: &mut SceneGraph,
    detections: &[Detection],
    camera_global_pose: &Pose,
    th: &AssociationThresholds,
) -> Result<Vec<Assignment>> {
    let mut record = Vec::with_capacity(detections.len());
    let existing: BTreeSet<NodeId> = graph.node_ids().into_iter().collect();
    for det in detections {
        if det.points_camera.is_empty() {
            return Err(invalid("detection without points"));
        }
        let world: Vec<Vec3> = det
            .points_camera
            .iter()
            .map(|p| camera_global_pose.transform_point(p))
            .collect();
        let points = voxel_downsample(&world, th.downsample_leaf);
        let bbox = fit_oriented_box(&points)?;

        let mut best: Option<(f64, f64, NodeId)> = None;
        for node in graph.nodes().filter(|n| existing.contains(&n.id)) {
            let cos = cosine_similarity(&node.embedding, &det.embedding)?;
            if cos < th.min_cosine {
                continue;
            }
            let iou = box_iou(&node.bbox, &bbox);
            if iou < th.min_iou {
                continue;
            }
            let better = match best {
                None => true,
                Some((bc, bi, _)) => cos > bc || (cos == bc && iou > bi),
            };
            if better {
                best = Some((cos, iou, node.id));
            }
        }

        let votes: BTreeMap<String, u32> = [(det.label.clone(), 1)].into_iter().collect();
        match best {
            Some((_, _, id)) => {
                let node = graph.node_mut(id).expect("candidate exists");
                absorb(node, &votes, &det.embedding, 1, &points, th.downsample_leaf)?;
                record.push(Assignment::Merged(id));
            }
            None => {
                let id = graph.insert_node(votes, det.embedding.clone(), points, bbox)?;
                record.push(Assignment::New(id));
            }
        }
    }
    Ok(record)
}

fn best_consolidation_pair(graph: &SceneGraph, th: &AssociationThresholds) -> Result<Option<(NodeId, NodeId)>> {
    let nodes: Vec<&ObjectNode> = graph.nodes().collect();
    let aabbs: Vec<_> = nodes.iter().map(|n| n.bbox.aabb()).collect();
    let mut best: Option<(f64, NodeId, NodeId)> = None;
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let (amin, amax) = &aabbs[i];
            let (bmin, bmax) = &aabbs[j];
            if (0..3).any(|k| amax[k] < bmin[k] || bmax[k] < amin[k]) {
                continue;
            }
            let iou = box_iou(&nodes[i].bbox, &nodes[j].bbox);
            if iou < th.consolidate_iou {
                continue;
            }
            if cosine_similarity(&nodes[i].embedding, &nodes[j].embedding)? < th.min_cosine {
                continue;
            }
            // nodes are id-ordered, so the first pair found at a given IoU
            // is the lexicographically smallest
            if best.is_none_or(|(b, _, _)| iou > b) {
                best = Some((iou, nodes[i].id, nodes[j].id));
            }
        }
    }
    Ok(best.map(|(_, a, b)| (a, b)))
}

/// Fuses two nodes into the one with the smaller id.
pub fn merge_nodes(graph: &mut SceneGraph, a: NodeId, b: NodeId, leaf: f64) -> Result<NodeId> {
    if a == b {
        return Err(invalid("cannot merge a node with itself"));
    }
    let (keep, gone) = (a.min(b), a.max(b));
    let other = graph
        .remove_node(gone)
        .ok_or_else(|| invalid(format!("node {gone} not in graph")))?;
    let node = graph
        .node_mut(keep)
        .ok_or_else(|| invalid(format!("node {keep} not in graph")))?;
    absorb(
        node,
        &other.label_votes,
        &other.embedding,
        other.detection_count,
        &other.points,
        leaf,
    )?;
    Ok(keep)
}

/// Repeatedly merges the qualifying pair with the highest IoU until none
/// qualifies. Edges touching merged-away nodes are dropped.
pub fn consolidate_nodes(graph: &mut SceneGraph, th: &AssociationThresholds) -> Result<usize> {
    let mut merges = 0;
    while let Some((a, b)) = best_consolidation_pair(graph, th)? {
        merge_nodes(graph, a, b, th.downsample_leaf)?;
        merges += 1;
    }
    Ok(merges)
}
