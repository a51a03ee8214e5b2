//! Value types shared by every stage: embeddings, object nodes, relation
//! edges and the scene graph itself.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::geometry::{OrientedBox, Vec3};
use crate::rng::rng_for;

pub const DEFAULT_EMBEDDING_DIM: usize = 64;

/// Unit-norm semantic descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticEmbedding {
    values: Vec<f64>,
}

impl SemanticEmbedding {
    /// Normalizes `values`; fails on an empty or zero vector.
    pub fn from_unnormalized(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if values.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("embedding must be a finite non-zero vector"));
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Count-weighted running mean of two embeddings, renormalized.
    /// Identical inputs return the input unchanged.
    pub fn weighted_mean(&self, w_self: f64, other: &Self, w_other: f64) -> Self {
        if self == other {
            return self.clone();
        }
        let v: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * w_self + b * w_other)
            .collect();
        // antipodal vectors with equal weights cancel; keep the older one
        Self::from_unnormalized(v).unwrap_or_else(|_| self.clone())
    }
}

/// Deterministic stand-in for a learned text/image descriptor: a Gaussian
/// vector drawn from a generator keyed on `(experiment_seed, label, dim)`,
/// normalized to unit length.
pub fn embed_label(label: &str, dim: usize, experiment_seed: u64) -> Result<SemanticEmbedding> {
    if label.is_empty() {
        return Err(invalid("label must be non-empty"));
    }
    if dim < 8 {
        return Err(invalid("embedding dimension must be at least 8"));
    }
    let digest = Sha256::digest(label.as_bytes());
    let word = |i: usize| u64::from_le_bytes(digest[i * 8..i * 8 + 8].try_into().unwrap());
    let mut rng = rng_for(&[experiment_seed, word(0), word(1), word(2), word(3), dim as u64]);
    let values: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    SemanticEmbedding::from_unnormalized(values)
}

pub fn cosine_similarity(a: &SemanticEmbedding, b: &SemanticEmbedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(invalid(format!(
            "embedding dimensions differ ({} vs {})",
            a.dim(),
            b.dim()
        )));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Caches label embeddings for one experiment.
#[derive(Debug, Clone)]
pub struct Embedder {
    dim: usize,
    seed: u64,
    cache: BTreeMap<String, SemanticEmbedding>,
}

impl Embedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            seed,
            cache: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn embed(&mut self, label: &str) -> Result<SemanticEmbedding> {
        if let Some(e) = self.cache.get(label) {
            return Ok(e.clone());
        }
        let e = embed_label(label, self.dim, self.seed)?;
        self.cache.insert(label.to_string(), e.clone());
        Ok(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    OnTopOf,
    Supports,
    Under,
    Over,
    Inside,
    NextTo,
}

impl Predicate {
    pub fn as_str(&self) -> &'static str {
        match self {
            Predicate::OnTopOf => "on_top_of",
            Predicate::Supports => "supports",
            Predicate::Under => "under",
            Predicate::Over => "over",
            Predicate::Inside => "inside",
            Predicate::NextTo => "next_to",
        }
    }
}

pub type NodeId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationEdge {
    pub source_id: NodeId,
    pub target_id: NodeId,
    pub predicate: Predicate,
}

/// A persistent object instance fused from one or more detections.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectNode {
    pub id: NodeId,
    pub label_votes: BTreeMap<String, u32>,
    pub embedding: SemanticEmbedding,
    pub points: Vec<Vec3>,
    pub bbox: OrientedBox,
    pub detection_count: u32,
}

impl ObjectNode {
    /// Most-voted label; ties go to the lexicographically smallest.
    pub fn label(&self) -> &str {
        let mut best: Option<(&String, u32)> = None;
        for (l, &c) in &self.label_votes {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((l, c));
            }
        }
        best.map(|(l, _)| l.as_str()).unwrap_or("")
    }

    pub fn centroid(&self) -> Vec3 {
        if self.points.is_empty() {
            return self.bbox.center;
        }
        self.points.iter().sum::<Vec3>() / self.points.len() as f64
    }
}

/// Object nodes plus at most one directed relation per ordered node pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneGraph {
    nodes: BTreeMap<NodeId, ObjectNode>,
    edges: BTreeMap<(NodeId, NodeId), Predicate>,
    pub step: u64,
    next_id: NodeId,
}

impl SceneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ObjectNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: NodeId) -> Option<&ObjectNode> {
        self.nodes.get(&id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut ObjectNode> {
        self.nodes.get_mut(&id)
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.keys().copied().collect()
    }

    /// Inserts a node under a fresh id from the monotone counter.
    pub fn insert_node(
        &mut self,
        label_votes: BTreeMap<String, u32>,
        embedding: SemanticEmbedding,
        points: Vec<Vec3>,
        bbox: OrientedBox,
    ) -> Result<NodeId> {
        if points.is_empty() {
            return Err(invalid("object node needs at least one point"));
        }
        let detection_count: u32 = label_votes.values().sum();
        if detection_count == 0 {
            return Err(invalid("object node needs at least one label vote"));
        }
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.insert(
            id,
            ObjectNode {
                id,
                label_votes,
                embedding,
                points,
                bbox,
                detection_count,
            },
        );
        Ok(id)
    }

    /// Removes a node and every edge touching it.
    pub fn remove_node(&mut self, id: NodeId) -> Option<ObjectNode> {
        let node = self.nodes.remove(&id)?;
        self.edges.retain(|&(s, t), _| s != id && t != id);
        Some(node)
    }

    pub fn edges(&self) -> impl Iterator<Item = RelationEdge> + '_ {
        self.edges.iter().map(|(&(s, t), &p)| RelationEdge {
            source_id: s,
            target_id: t,
            predicate: p,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, source: NodeId, target: NodeId) -> Option<Predicate> {
        self.edges.get(&(source, target)).copied()
    }

    /// Replaces all edges. Rejects self loops, dangling endpoints and
    /// duplicate ordered pairs.
    pub fn replace_edges(&mut self, edges: impl IntoIterator<Item = RelationEdge>) -> Result<()> {
        let mut map = BTreeMap::new();
        for e in edges {
            if e.source_id == e.target_id {
                return Err(invalid("relation edge cannot be a self loop"));
            }
            if !self.nodes.contains_key(&e.source_id) || !self.nodes.contains_key(&e.target_id) {
                return Err(invalid("relation edge endpoint missing from graph"));
            }
            if map.insert((e.source_id, e.target_id), e.predicate).is_some() {
                return Err(invalid("duplicate edge for an ordered pair"));
            }
        }
        self.edges = map;
        Ok(())
    }

    pub fn clear_edges(&mut self) {
        self.edges.clear();
    }

    pub fn total_detections(&self) -> u64 {
        self.nodes.values().map(|n| n.detection_count as u64).sum()
    }

    pub fn check_invariants(&self) -> Result<()> {
        for &(s, t) in self.edges.keys() {
            if s == t || !self.nodes.contains_key(&s) || !self.nodes.contains_key(&t) {
                return Err(invalid("edge invariant violated"));
            }
        }
        for n in self.nodes.values() {
            if n.points.is_empty() || n.detection_count != n.label_votes.values().sum::<u32>() {
                return Err(invalid(format!("node {} invariant violated", n.id)));
            }
            if n.id >= self.next_id {
                return Err(invalid("node id beyond id counter"));
            }
        }
        Ok(())
    }

    pub fn export(&self) -> GraphExport {
        GraphExport {
            nodes: self
                .nodes
                .values()
                .map(|n| NodeExport {
                    id: n.id,
                    label: n.label().to_string(),
                    label_votes: n.label_votes.clone(),
                    centroid: n.centroid().into(),
                    bbox: BoxExport::from(&n.bbox),
                    detection_count: n.detection_count,
                })
                .collect(),
            edges: self
                .edges()
                .map(|e| EdgeExport {
                    source: e.source_id,
                    target: e.target_id,
                    predicate: e.predicate,
                })
                .collect(),
            step: self.step,
        }
    }
}

/// Detection source: the robot's own camera or a fixed external camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionSource {
    Onboard,
    External(usize),
}

/// One segmented object observation lifted to 3D in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub label: String,
    pub embedding: SemanticEmbedding,
    pub points_camera: Vec<Vec3>,
    pub source: DetectionSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxExport {
    pub center: [f64; 3],
    pub yaw: f64,
    pub extents: [f64; 3],
}

impl From<&OrientedBox> for BoxExport {
    fn from(b: &OrientedBox) -> Self {
        Self {
            center: b.center.into(),
            yaw: b.yaw,
            extents: b.extents.into(),
        }
    }
}

impl From<&BoxExport> for OrientedBox {
    fn from(b: &BoxExport) -> Self {
        OrientedBox::new(Vec3::from(b.center), b.yaw, Vec3::from(b.extents))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeExport {
    pub id: NodeId,
    pub label: String,
    pub label_votes: BTreeMap<String, u32>,
    pub centroid: [f64; 3],
    #[serde(rename = "box")]
    pub bbox: BoxExport,
    pub detection_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeExport {
    pub source: NodeId,
    pub target: NodeId,
    pub predicate: Predicate,
}

/// JSON form of a scene graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<NodeExport>,
    pub edges: Vec<EdgeExport>,
    pub step: u64,
}
