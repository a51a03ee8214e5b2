mod common;

use activesg::geometry::{OrientedBox, Vec3};
use activesg::relations::{evaluate_boxes, infer_edges, RelationThresholds};
use activesg::scene_model::Predicate;
use proptest::prelude::*;

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

/// Boxes laid out so that every predicate shows up regularly: `b` is
/// placed relative to `a`'s top, bottom or side.
fn box_pair() -> impl Strategy<Value = (OrientedBox, OrientedBox)> {
    let ext = || (0.2..1.2f64, 0.2..1.2f64, 0.2..1.0f64);
    (
        ext(),
        ext(),
        -3.2..3.2f64,
        -3.2..3.2f64,
        -0.8..0.8f64,
        -0.8..0.8f64,
        0usize..4,
        -0.06..0.06f64,
        0.0..0.8f64,
    )
        .prop_map(|(ea, eb, ya, yb, dx, dy, layout, jitter, lift)| {
            let ea = Vec3::new(ea.0, ea.1, ea.2);
            let eb = Vec3::new(eb.0, eb.1, eb.2);
            let a = OrientedBox::new(Vec3::new(0.0, 0.0, 0.5 * ea.z), ya, ea);
            let z = match layout {
                0 => ea.z + jitter + 0.5 * eb.z,
                1 => ea.z + lift + 0.5 * eb.z,
                2 => 0.5 * eb.z + 0.5 * jitter,
                _ => 0.5 * ea.z,
            };
            let scale = if layout == 3 { 0.3 } else { 1.0 };
            let b = OrientedBox::new(Vec3::new(dx, dy, z), yb, eb * scale);
            (a, b)
        })
}

fn rotate(b: &OrientedBox, angle: f64, shift: Vec3) -> OrientedBox {
    let (s, c) = angle.sin_cos();
    let p = b.center;
    OrientedBox::new(
        Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z) + shift,
        b.yaw + angle,
        b.extents,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn reverse_pair_gets_the_dual_predicate((a, b) in box_pair()) {
        let th = RelationThresholds::default();
        let fwd = evaluate_boxes(&a, &b, &th);
        let back = evaluate_boxes(&b, &a, &th);
        if let Some(d) = fwd.and_then(dual) {
            prop_assert_eq!(back, Some(d));
        }
        if let Some(d) = back.and_then(dual) {
            prop_assert_eq!(fwd, Some(d));
        }
    }

    #[test]
    fn next_to_is_symmetric((a, b) in box_pair()) {
        let th = RelationThresholds::default();
        prop_assert_eq!(
            evaluate_boxes(&a, &b, &th) == Some(Predicate::NextTo),
            evaluate_boxes(&b, &a, &th) == Some(Predicate::NextTo)
        );
    }

    #[test]
    fn invariant_under_planar_motion(
        (a, b) in box_pair(),
        angle in -3.2..3.2f64,
        sx in -5.0..5.0f64,
        sy in -5.0..5.0f64,
        sz in -1.0..1.0f64,
    ) {
        let th = RelationThresholds::default();
        let shift = Vec3::new(sx, sy, sz);
        prop_assert_eq!(
            evaluate_boxes(&a, &b, &th),
            evaluate_boxes(&rotate(&a, angle, shift), &rotate(&b, angle, shift), &th)
        );
    }

    #[test]
    fn inside_never_holds_both_ways((a, b) in box_pair()) {
        let th = RelationThresholds::default();
        let both = evaluate_boxes(&a, &b, &th) == Some(Predicate::Inside)
            && evaluate_boxes(&b, &a, &th) == Some(Predicate::Inside);
        // identical boxes are the only way both directions can qualify
        prop_assert!(!both || a == b);
    }
}

#[test]
fn graph_edges_pair_up_with_their_duals() {
    let th = RelationThresholds::default();
    for seed in 0..50 {
        let mut g = common::graph_of(&common::relation_scene(seed));
        infer_edges(&mut g, &th).unwrap();
        let edges = common::edge_set(&g);
        for &(s, t, p) in &edges {
            if let Some(d) = dual(p) {
                assert!(edges.contains(&(t, s, d)), "seed {seed}: {s}->{t} {p:?} lacks its dual");
            }
        }
    }
}

#[test]
fn stacked_items_read_naturally() {
    let th = RelationThresholds::default();
    let table = OrientedBox::new(Vec3::new(0.0, 0.0, 0.375), 0.0, Vec3::new(1.2, 0.8, 0.75));
    let cup = OrientedBox::new(Vec3::new(0.1, 0.1, 0.80), 0.3, Vec3::new(0.08, 0.08, 0.1));
    let lamp = OrientedBox::new(Vec3::new(0.0, 0.0, 1.2), 0.0, Vec3::new(0.4, 0.4, 0.3));
    let chair = OrientedBox::new(Vec3::new(0.95, 0.0, 0.45), 0.0, Vec3::new(0.5, 0.5, 0.9));
    assert_eq!(evaluate_boxes(&cup, &table, &th), Some(Predicate::OnTopOf));
    assert_eq!(evaluate_boxes(&table, &cup, &th), Some(Predicate::Supports));
    assert_eq!(evaluate_boxes(&table, &lamp, &th), Some(Predicate::Under));
    assert_eq!(evaluate_boxes(&lamp, &table, &th), Some(Predicate::Over));
    assert_eq!(evaluate_boxes(&chair, &table, &th), Some(Predicate::NextTo));
    assert_eq!(evaluate_boxes(&table, &chair, &th), Some(Predicate::NextTo));
}
