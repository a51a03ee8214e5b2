//! Geometry-only spatial relations between object nodes.
//!
//! Each ordered pair gets at most one predicate. Rules are tried in a fixed
//! priority order and the first match wins:
//!
//! 1. `on_top_of`: bottom of A within `contact_gap` of the top of B, enough
//!    footprint overlap, and A not mostly sunk into B.
//! 2. `supports`: rule 1 with the pair swapped.
//! 3. `under`: A entirely below B with a vertical gap in
//!    `(contact_gap, max_vertical_gap]` and enough footprint overlap.
//! 4. `over`: rule 3 with the pair swapped.
//! 5. `inside`: most of A's volume lies in B, and A is not the larger box.
//! 6. `next_to`: footprints within `near_distance`, heights overlapping,
//!    and neither box inside the other.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{containment_fraction, footprint_gap, footprint_overlap, vertical_overlap, OrientedBox};
use crate::scene_model::{ObjectNode, Predicate, RelationEdge, SceneGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelationThresholds {
    pub contact_gap: f64,
    pub max_vertical_gap: f64,
    pub min_footprint_overlap: f64,
    pub inside_fraction: f64,
    pub near_distance: f64,
    pub min_height_interval_overlap: f64,
    pub on_top_containment_cap: f64,
}

impl Default for RelationThresholds {
    fn default() -> Self {
        Self {
            contact_gap: 0.05,
            max_vertical_gap: 0.50,
            min_footprint_overlap: 0.30,
            inside_fraction: 0.80,
            near_distance: 0.30,
            min_height_interval_overlap: 0.25,
            on_top_containment_cap: 0.50,
        }
    }
}

impl RelationThresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("contact_gap", self.contact_gap),
            ("max_vertical_gap", self.max_vertical_gap),
            ("near_distance", self.near_distance),
        ] {
            if !(v > 0.0) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("min_footprint_overlap", self.min_footprint_overlap),
            ("inside_fraction", self.inside_fraction),
            ("min_height_interval_overlap", self.min_height_interval_overlap),
            ("on_top_containment_cap", self.on_top_containment_cap),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

fn rests_on(a: &OrientedBox, b: &OrientedBox, th: &RelationThresholds) -> bool {
    let gap = a.zmin() - b.zmax();
    gap >= -th.contact_gap
        && gap <= th.contact_gap
        && footprint_overlap(a, b) >= th.min_footprint_overlap
        && containment_fraction(a, b) <= th.on_top_containment_cap
}

fn below(a: &OrientedBox, b: &OrientedBox, th: &RelationThresholds) -> bool {
    let gap = b.zmin() - a.zmax();
    a.zmax() < b.zmin()
        && gap > th.contact_gap
        && gap <= th.max_vertical_gap
        && footprint_overlap(a, b) >= th.min_footprint_overlap
}

fn within(a: &OrientedBox, b: &OrientedBox, th: &RelationThresholds) -> bool {
    containment_fraction(a, b) >= th.inside_fraction && a.volume() <= b.volume()
}

fn beside(a: &OrientedBox, b: &OrientedBox, th: &RelationThresholds) -> bool {
    footprint_gap(a, b) <= th.near_distance
        && vertical_overlap(a, b) / a.height().min(b.height()) >= th.min_height_interval_overlap
        && !within(a, b, th)
        && !within(b, a, th)
}

/// Predicate for the ordered box pair `(a, b)`, if any.
pub fn evaluate_boxes(a: &OrientedBox, b: &OrientedBox, th: &RelationThresholds) -> Option<Predicate> {
    if rests_on(a, b, th) {
        Some(Predicate::OnTopOf)
    } else if rests_on(b, a, th) {
        Some(Predicate::Supports)
    } else if below(a, b, th) {
        Some(Predicate::Under)
    } else if below(b, a, th) {
        Some(Predicate::Over)
    } else if within(a, b, th) {
        Some(Predicate::Inside)
    } else if beside(a, b, th) {
        Some(Predicate::NextTo)
    } else {
        None
    }
}

pub fn evaluate_pair(a: &ObjectNode, b: &ObjectNode, th: &RelationThresholds) -> Result<Option<Predicate>> {
    if a.id == b.id {
        return Err(invalid("relation needs two distinct nodes"));
    }
    Ok(evaluate_boxes(&a.bbox, &b.bbox, th))
}

/// Recomputes every edge of the graph from node boxes.
pub fn infer_edges(graph: &mut SceneGraph, th: &RelationThresholds) -> Result<()> {
    let nodes: Vec<&ObjectNode> = graph.nodes().collect();
    let aabbs: Vec<_> = nodes.iter().map(|n| n.bbox.aabb()).collect();
    // any relation needs the boxes within this horizontal reach of each other
    let reach = th.near_distance.max(0.0);
    let mut edges = Vec::new();
    for i in 0..nodes.len() {
        for j in 0..nodes.len() {
            if i == j {
                continue;
            }
            let ((amin, amax), (bmin, bmax)) = (&aabbs[i], &aabbs[j]);
            if amin.x > bmax.x + reach || bmin.x > amax.x + reach || amin.y > bmax.y + reach || bmin.y > amax.y + reach
            {
                continue;
            }
            if let Some(p) = evaluate_boxes(&nodes[i].bbox, &nodes[j].bbox, th) {
                edges.push(RelationEdge {
                    source_id: nodes[i].id,
                    target_id: nodes[j].id,
                    predicate: p,
                });
            }
        }
    }
    graph.replace_edges(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::scene_model::embed_label;

    fn aabb(min: [f64; 3], max: [f64; 3]) -> OrientedBox {
        OrientedBox::axis_aligned(Vec3::from(min), Vec3::from(max))
    }

    fn graph_of(boxes: &[(&str, OrientedBox)]) -> SceneGraph {
        let mut g = SceneGraph::new();
        for (label, b) in boxes {
            g.insert_node(
                [(label.to_string(), 1)].into_iter().collect(),
                embed_label(label, 64, 0).unwrap(),
                vec![b.center],
                *b,
            )
            .unwrap();
        }
        g
    }

    #[test]
    fn cup_on_table() {
        let th = RelationThresholds::default();
        let table = aabb([0.0, 0.0, 0.0], [1.2, 0.8, 0.75]);
        let cup = aabb([0.5, 0.3, 0.75], [0.58, 0.38, 0.85]);
        assert_eq!(evaluate_boxes(&cup, &table, &th), Some(Predicate::OnTopOf));
        assert_eq!(evaluate_boxes(&table, &cup, &th), Some(Predicate::Supports));
        let mut g = graph_of(&[("cup", cup), ("table", table)]);
        infer_edges(&mut g, &th).unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges.len(), 2);
        assert_eq!(g.edge(0, 1), Some(Predicate::OnTopOf));
        assert_eq!(g.edge(1, 0), Some(Predicate::Supports));
    }

    #[test]
    fn book_inside_cabinet() {
        let th = RelationThresholds::default();
        let cabinet = aabb([0.0, 0.0, 0.0], [1.0, 0.5, 1.8]);
        let book = aabb([0.2, 0.1, 0.9], [0.4, 0.3, 1.2]);
        // rules 1-4 fail on their own
        assert!(!rests_on(&book, &cabinet, &th));
        assert!(!rests_on(&cabinet, &book, &th));
        assert!(!below(&book, &cabinet, &th));
        assert!(!below(&cabinet, &book, &th));
        assert_eq!(evaluate_boxes(&book, &cabinet, &th), Some(Predicate::Inside));
        // no reverse "contains" predicate
        assert_eq!(evaluate_boxes(&cabinet, &book, &th), None);
    }

    #[test]
    fn far_apart_and_chairs_side_by_side() {
        let th = RelationThresholds::default();
        let a = aabb([0.0, 0.0, 0.0], [0.5, 0.5, 0.9]);
        let far = a.translated(&Vec3::new(10.0, 0.0, 0.0));
        assert_eq!(evaluate_boxes(&a, &far, &th), None);
        let b = a.translated(&Vec3::new(0.7, 0.0, 0.0));
        assert_eq!(evaluate_boxes(&a, &b, &th), Some(Predicate::NextTo));
        assert_eq!(evaluate_boxes(&b, &a, &th), Some(Predicate::NextTo));
    }

    #[test]
    fn lamp_over_table_and_dual() {
        let th = RelationThresholds::default();
        let table = aabb([0.0, 0.0, 0.0], [1.0, 1.0, 0.75]);
        let lamp = aabb([0.3, 0.3, 1.0], [0.7, 0.7, 1.3]);
        assert_eq!(evaluate_boxes(&table, &lamp, &th), Some(Predicate::Under));
        assert_eq!(evaluate_boxes(&lamp, &table, &th), Some(Predicate::Over));
    }

    #[test]
    fn small_graphs_have_no_edges() {
        let th = RelationThresholds::default();
        let mut g = SceneGraph::new();
        infer_edges(&mut g, &th).unwrap();
        assert_eq!(g.edge_count(), 0);
        let mut g = graph_of(&[("cup", aabb([0.0; 3], [0.1; 3]))]);
        infer_edges(&mut g, &th).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn same_id_is_error() {
        let g = graph_of(&[("cup", aabb([0.0; 3], [0.1; 3]))]);
        let n = g.node(0).unwrap();
        assert!(evaluate_pair(n, n, &RelationThresholds::default()).is_err());
    }
}
