//! Node-level scoring against ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Vec3;
use crate::scene_model::{cosine_similarity, Embedder, NodeId, SceneGraph, SemanticEmbedding};
use crate::simulator::SceneSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchThresholds {
    pub min_semantic: f64,
    pub max_centroid_dist: f64,
}

impl Default for MatchThresholds {
    fn default() -> Self {
        Self {
            min_semantic: 0.85,
            max_centroid_dist: 0.50,
        }
    }
}

impl MatchThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_semantic > 0.0 && self.min_semantic <= 1.0) {
            return Err(invalid("min_semantic must lie in (0, 1]"));
        }
        if !(self.max_centroid_dist > 0.0) {
            return Err(invalid("max_centroid_dist must be positive"));
        }
        Ok(())
    }
}

/// A predicted node reduced to what matching needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedObject {
    pub id: NodeId,
    pub embedding: SemanticEmbedding,
    pub center: Vec3,
}

/// A ground-truth object reduced to what matching needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthObject {
    pub embedding: SemanticEmbedding,
    pub center: Vec3,
}

/// Candidate pair passing both gates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchCandidate {
    pub pred: NodeId,
    pub gt: usize,
    pub cosine: f64,
    pub distance: f64,
}

/// One-to-one matching, `(pred id, gt index)` pairs sorted by pred id.
pub type Matching = Vec<(NodeId, usize)>;

/// All pairs passing the semantic and localization gates.
pub fn candidate_pairs(
    pred: &[PredictedObject],
    gt: &[TruthObject],
    th: &MatchThresholds,
) -> Result<Vec<MatchCandidate>> {
    let mut out = Vec::new();
    for p in pred {
        for (g, t) in gt.iter().enumerate() {
            let distance = (p.center - t.center).norm();
            if distance > th.max_centroid_dist {
                continue;
            }
            let cosine = cosine_similarity(&p.embedding, &t.embedding)?;
            if cosine >= th.min_semantic {
                out.push(MatchCandidate {
                    pred: p.id,
                    gt: g,
                    cosine,
                    distance,
                });
            }
        }
    }
    Ok(out)
}

fn priority(a: &MatchCandidate, b: &MatchCandidate) -> std::cmp::Ordering {
    b.cosine
        .total_cmp(&a.cosine)
        .then(a.distance.total_cmp(&b.distance))
        .then(a.pred.cmp(&b.pred))
        .then(a.gt.cmp(&b.gt))
}

/// Greedy one-to-one selection: descending cosine, then ascending centroid
/// distance, then ascending pred id (then gt index).
pub fn greedy_match(mut candidates: Vec<MatchCandidate>) -> Matching {
    candidates.sort_by(priority);
    let mut used_p = BTreeSet::new();
    let mut used_g = BTreeSet::new();
    let mut out = Vec::new();
    for c in candidates {
        if used_p.contains(&c.pred) || used_g.contains(&c.gt) {
            continue;
        }
        used_p.insert(c.pred);
        used_g.insert(c.gt);
        out.push((c.pred, c.gt));
    }
    out.sort_unstable();
    out
}

/// Size of a maximum one-to-one matching over `edges` (augmenting paths).
pub fn max_matching_size(edges: &[(NodeId, usize)]) -> usize {
    let mut adj: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for &(p, g) in edges {
        adj.entry(p).or_default().push(g);
    }
    let mut owner: BTreeMap<usize, NodeId> = BTreeMap::new();
    fn augment(
        p: NodeId,
        adj: &BTreeMap<NodeId, Vec<usize>>,
        owner: &mut BTreeMap<usize, NodeId>,
        seen: &mut BTreeSet<usize>,
    ) -> bool {
        for &g in &adj[&p] {
            if !seen.insert(g) {
                continue;
            }
            let free = match owner.get(&g) {
                None => true,
                Some(&q) => augment(q, adj, owner, seen),
            };
            if free {
                owner.insert(g, p);
                return true;
            }
        }
        false
    }
    adj.keys()
        .filter(|&&p| augment(p, &adj, &mut owner, &mut BTreeSet::new()))
        .count()
}

/// One-to-one selection of maximum cardinality. Pairs are taken in the
/// greedy priority order, skipping any pair that would rule out a maximum
/// matching; the result equals [`greedy_match`] whenever greedy already
/// reaches the maximum. Unlike plain greedy, tightening either gate can
/// never increase the number of matches.
pub fn optimal_match(mut candidates: Vec<MatchCandidate>) -> Matching {
    let greedy = greedy_match(candidates.clone());
    let all: Vec<(NodeId, usize)> = candidates.iter().map(|c| (c.pred, c.gt)).collect();
    let mut need = max_matching_size(&all);
    if greedy.len() == need {
        return greedy;
    }
    candidates.sort_by(priority);
    let mut used_p = BTreeSet::new();
    let mut used_g = BTreeSet::new();
    let mut out = Vec::new();
    for c in &candidates {
        if need == 0 {
            break;
        }
        if used_p.contains(&c.pred) || used_g.contains(&c.gt) {
            continue;
        }
        let rest: Vec<(NodeId, usize)> = candidates
            .iter()
            .filter(|d| d.pred != c.pred && d.gt != c.gt && !used_p.contains(&d.pred) && !used_g.contains(&d.gt))
            .map(|d| (d.pred, d.gt))
            .collect();
        if 1 + max_matching_size(&rest) == need {
            used_p.insert(c.pred);
            used_g.insert(c.gt);
            out.push((c.pred, c.gt));
            need -= 1;
        }
    }
    out.sort_unstable();
    out
}

pub fn match_objects(pred: &[PredictedObject], gt: &[TruthObject], th: &MatchThresholds) -> Result<Matching> {
    Ok(optimal_match(candidate_pairs(pred, gt, th)?))
}

/// Ground-truth objects embedded with the experiment's embedder.
pub fn truth_objects(gt: &SceneSpec, embedder: &mut Embedder) -> Result<Vec<TruthObject>> {
    gt.objects
        .iter()
        .map(|o| {
            Ok(TruthObject {
                embedding: embedder.embed(&o.label)?,
                center: o.bbox.center,
            })
        })
        .collect()
}

pub fn predicted_objects(pred: &SceneGraph) -> Vec<PredictedObject> {
    pred.nodes()
        .map(|n| PredictedObject {
            id: n.id,
            embedding: n.embedding.clone(),
            center: n.bbox.center,
        })
        .collect()
}

/// Matches graph nodes to ground-truth objects. Ground-truth embeddings are
/// computed with `embed_label` under `experiment_seed` at the dimension of
/// the graph's embeddings.
pub fn match_nodes(pred: &SceneGraph, gt: &SceneSpec, th: &MatchThresholds, experiment_seed: u64) -> Result<Matching> {
    let dim = pred.nodes().next().map(|n| n.embedding.dim());
    let Some(dim) = dim else {
        return Ok(Vec::new());
    };
    let mut embedder = Embedder::new(dim, experiment_seed);
    match_objects(&predicted_objects(pred), &truth_objects(gt, &mut embedder)?, th)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn compute_metrics(matched: usize, n_pred: usize, n_gt: usize) -> Result<Metrics> {
    if n_gt == 0 {
        return Err(invalid("ground truth must contain at least one object"));
    }
    if matched > n_pred.min(n_gt) {
        return Err(invalid("matching larger than either side"));
    }
    let precision = if n_pred == 0 {
        0.0
    } else {
        matched as f64 / n_pred as f64
    };
    let recall = matched as f64 / n_gt as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics { precision, recall, f1 })
}

/// One row of the per-step time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub planner: String,
    pub nodes_pred: usize,
    pub nodes_gt: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when no viewpoint was selected (bootstrap step).
    pub selected_viewpoint: Option<usize>,
    pub selected_score: f64,
    pub travel_m: f64,
    pub wall_ms: u64,
}

pub const STEPS_CSV_HEADER: &str =
    "step,planner,nodes_pred,nodes_gt,precision,recall,f1,selected_viewpoint,selected_score,travel_m,wall_ms";

impl StepRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{}",
            self.step,
            self.planner,
            self.nodes_pred,
            self.nodes_gt,
            self.precision,
            self.recall,
            self.f1,
            self.selected_viewpoint.map(|v| v.to_string()).unwrap_or_default(),
            self.selected_score,
            self.travel_m,
            self.wall_ms
        )
    }

    pub fn parse_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if f.len() != 11 {
            return Err(invalid(format!("expected 11 fields, found {}", f.len())));
        }
        let bad = |name: &str| invalid(format!("field '{name}' is malformed in row '{line}'"));
        let num = |i: usize, name: &str| f[i].parse::<f64>().map_err(|_| bad(name));
        let int = |i: usize, name: &str| f[i].parse::<usize>().map_err(|_| bad(name));
        Ok(Self {
            step: int(0, "step")?,
            planner: f[1].to_string(),
            nodes_pred: int(2, "nodes_pred")?,
            nodes_gt: int(3, "nodes_gt")?,
            precision: num(4, "precision")?,
            recall: num(5, "recall")?,
            f1: num(6, "f1")?,
            selected_viewpoint: if f[7].is_empty() {
                None
            } else {
                Some(int(7, "selected_viewpoint")?)
            },
            selected_score: num(8, "selected_score")?,
            travel_m: num(9, "travel_m")?,
            wall_ms: f[10].parse().map_err(|_| bad("wall_ms"))?,
        })
    }
}

/// Writes the series as UTF-8 CSV with LF line endings.
pub fn write_steps_csv(mut w: impl Write, records: &[StepRecord]) -> std::io::Result<()> {
    writeln!(w, "{STEPS_CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn read_steps_csv(path: impl AsRef<std::path::Path>) -> Result<Vec<StepRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(STEPS_CSV_HEADER) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            column: 1,
            message: "unexpected steps.csv header".into(),
            context: text.lines().next().unwrap_or("").to_string(),
        });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            StepRecord::parse_row(l).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                column: 1,
                message: e.to_string(),
                context: l.to_string(),
            })
        })
        .collect()
}
