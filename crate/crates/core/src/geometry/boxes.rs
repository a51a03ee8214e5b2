use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{Vec2, Vec3};
use crate::error::{invalid, Result};

/// Smallest side length a box may have, in meters.
pub const MIN_EXTENT: f64 = 0.01;

/// Gravity-aligned box: yaw about +z, full side lengths in `extents`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vec3,
    pub yaw: f64,
    pub extents: Vec3,
}

fn canonical_yaw(yaw: f64) -> f64 {
    let y = yaw - PI * ((yaw + FRAC_PI_2) / PI).floor();
    // floor can land exactly on the excluded upper bound after rounding
    if y >= FRAC_PI_2 {
        y - PI
    } else {
        y
    }
}

impl OrientedBox {
    /// Canonicalizes yaw into [-π/2, π/2) and clamps extents to [`MIN_EXTENT`].
    pub fn new(center: Vec3, yaw: f64, extents: Vec3) -> Self {
        Self {
            center,
            yaw: canonical_yaw(yaw),
            extents: extents.map(|e| e.max(MIN_EXTENT)),
        }
    }

    pub fn axis_aligned(min: Vec3, max: Vec3) -> Self {
        Self::new((min + max) * 0.5, 0.0, max - min)
    }

    pub fn zmin(&self) -> f64 {
        self.center.z - 0.5 * self.extents.z
    }

    pub fn zmax(&self) -> f64 {
        self.center.z + 0.5 * self.extents.z
    }

    pub fn height(&self) -> f64 {
        self.extents.z
    }

    pub fn footprint_area(&self) -> f64 {
        self.extents.x * self.extents.y
    }

    pub fn volume(&self) -> f64 {
        self.extents.x * self.extents.y * self.extents.z
    }

    fn axes(&self) -> (Vec2, Vec2) {
        let (s, c) = self.yaw.sin_cos();
        (Vec2::new(c, s), Vec2::new(-s, c))
    }

    /// Footprint rectangle corners, counter-clockwise.
    pub fn footprint(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let c = self.center.xy();
        let hu = u * (0.5 * self.extents.x);
        let hv = v * (0.5 * self.extents.y);
        [c - hu - hv, c + hu - hv, c + hu + hv, c - hu + hv]
    }

    /// Expresses a world point in the box frame (origin at center, unrotated).
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        let (u, v) = self.axes();
        let d = p - self.center;
        Vec3::new(u.x * d.x + u.y * d.y, v.x * d.x + v.y * d.y, d.z)
    }

    pub fn to_local_dir(&self, d: &Vec3) -> Vec3 {
        let (u, v) = self.axes();
        Vec3::new(u.x * d.x + u.y * d.y, v.x * d.x + v.y * d.y, d.z)
    }

    pub fn contains_point(&self, p: &Vec3, tol: f64) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= 0.5 * self.extents.x + tol
            && l.y.abs() <= 0.5 * self.extents.y + tol
            && l.z.abs() <= 0.5 * self.extents.z + tol
    }

    /// The eight corners, bottom face first.
    pub fn corners(&self) -> [Vec3; 8] {
        let fp = self.footprint();
        let (lo, hi) = (self.zmin(), self.zmax());
        [
            Vec3::new(fp[0].x, fp[0].y, lo),
            Vec3::new(fp[1].x, fp[1].y, lo),
            Vec3::new(fp[2].x, fp[2].y, lo),
            Vec3::new(fp[3].x, fp[3].y, lo),
            Vec3::new(fp[0].x, fp[0].y, hi),
            Vec3::new(fp[1].x, fp[1].y, hi),
            Vec3::new(fp[2].x, fp[2].y, hi),
            Vec3::new(fp[3].x, fp[3].y, hi),
        ]
    }

    /// Axis-aligned bounds of the box.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        let fp = self.footprint();
        let mut min = Vec3::new(f64::INFINITY, f64::INFINITY, self.zmin());
        let mut max = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, self.zmax());
        for c in fp {
            min.x = min.x.min(c.x);
            min.y = min.y.min(c.y);
            max.x = max.x.max(c.x);
            max.y = max.y.max(c.y);
        }
        (min, max)
    }

    pub fn translated(&self, t: &Vec3) -> Self {
        Self::new(self.center + t, self.yaw, self.extents)
    }

    /// Rotates the box about the world z axis through the origin.
    pub fn rotated_about_z(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let p = self.center;
        Self::new(
            Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z),
            self.yaw + angle,
            self.extents,
        )
    }
}

fn cross2(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn polygon_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        acc += cross2(&poly[i], &poly[(i + 1) % poly.len()]);
    }
    0.5 * acc.abs()
}

/// Sutherland-Hodgman clip of `subject` by the convex CCW polygon `clip`.
fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b - a;
        let side = |p: &Vec2| cross2(&edge, &(p - a));
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(&cur), side(&prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(prev + (cur - prev) * (sp / (sp - sc)));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(prev + (cur - prev) * (sp / (sp - sc)));
            }
        }
    }
    output
}

pub fn footprint_intersection_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    // cheap reject on circumscribed circles
    let ra = 0.5 * a.extents.xy().norm();
    let rb = 0.5 * b.extents.xy().norm();
    if (a.center.xy() - b.center.xy()).norm() > ra + rb {
        return 0.0;
    }
    polygon_area(&clip_convex(&a.footprint(), &b.footprint()))
}

pub fn vertical_overlap(a: &OrientedBox, b: &OrientedBox) -> f64 {
    (a.zmax().min(b.zmax()) - a.zmin().max(b.zmin())).max(0.0)
}

pub fn intersection_volume(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let dz = vertical_overlap(a, b);
    if dz <= 0.0 {
        return 0.0;
    }
    footprint_intersection_area(a, b) * dz
}

/// Footprint intersection area over the smaller footprint area.
pub fn footprint_overlap(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let inter = footprint_intersection_area(a, b);
    (inter / a.footprint_area().min(b.footprint_area())).clamp(0.0, 1.0)
}

pub fn box_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let inter = intersection_volume(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    (inter / (a.volume() + b.volume() - inter)).clamp(0.0, 1.0)
}

/// Fraction of `a`'s volume lying inside `b`.
pub fn containment_fraction(a: &OrientedBox, b: &OrientedBox) -> f64 {
    (intersection_volume(a, b) / a.volume()).clamp(0.0, 1.0)
}

fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

fn separated_on_axes(pa: &[Vec2; 4], pb: &[Vec2; 4]) -> bool {
    for poly in [pa, pb] {
        for i in 0..4 {
            let e = poly[(i + 1) % 4] - poly[i];
            let n = Vec2::new(-e.y, e.x);
            let (mut amin, mut amax) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in pa {
                let d = n.dot(p);
                amin = amin.min(d);
                amax = amax.max(d);
            }
            for p in pb {
                let d = n.dot(p);
                bmin = bmin.min(d);
                bmax = bmax.max(d);
            }
            if amax < bmin || bmax < amin {
                return true;
            }
        }
    }
    false
}

/// Minimum horizontal distance between two footprints; 0 when they touch.
pub fn footprint_gap(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let pa = a.footprint();
    let pb = b.footprint();
    if !separated_on_axes(&pa, &pb) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (p, q) in [(&pa, &pb), (&pb, &pa)] {
        for v in p.iter() {
            for i in 0..4 {
                best = best.min(point_segment_distance(v, &q[i], &q[(i + 1) % 4]));
            }
        }
    }
    best
}

/// Andrew's monotone chain; returns the hull counter-clockwise without
/// repeating the first point. Collinear inputs yield the two extreme points.
fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if cross2(&(b - a), &(p - a)) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

/// Fits a gravity-aligned box: yaw from the minimum-area rectangle enclosing
/// the horizontal projection (rotating calipers over the hull), z from the
/// point range. The fitted yaw lies in [0, π/2).
pub fn fit_oriented_box(points: &[Vec3]) -> Result<OrientedBox> {
    if points.is_empty() {
        return Err(invalid("cannot fit a box to an empty point set"));
    }
    let (zmin, zmax) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.z), hi.max(p.z))
    });
    let xy: Vec<Vec2> = points.iter().map(|p| p.xy()).collect();
    let hull = convex_hull(&xy);

    let mut angles = Vec::with_capacity(hull.len() + 1);
    angles.push(0.0);
    if hull.len() >= 2 {
        for i in 0..hull.len() {
            let e = hull[(i + 1) % hull.len()] - hull[i];
            if e.norm_squared() > 0.0 {
                angles.push(e.y.atan2(e.x).rem_euclid(FRAC_PI_2));
            }
        }
    }

    let mut best: Option<(f64, f64, [f64; 4])> = None;
    for &theta in &angles {
        let (s, c) = theta.sin_cos();
        let (mut umin, mut umax, mut vmin, mut vmax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            let u = c * p.x + s * p.y;
            let v = -s * p.x + c * p.y;
            umin = umin.min(u);
            umax = umax.max(u);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        let area = (umax - umin).max(MIN_EXTENT) * (vmax - vmin).max(MIN_EXTENT);
        let better = match &best {
            None => true,
            Some((a, _, _)) => area < a - 1e-12 * a.max(1e-12),
        };
        if better {
            best = Some((area, theta, [umin, umax, vmin, vmax]));
        }
    }
    let (_, theta, [umin, umax, vmin, vmax]) = best.expect("at least one candidate angle");
    let (s, c) = theta.sin_cos();
    let (uc, vc) = (0.5 * (umin + umax), 0.5 * (vmin + vmax));
    let center = Vec3::new(c * uc - s * vc, s * uc + c * vc, 0.5 * (zmin + zmax));
    Ok(OrientedBox::new(
        center,
        theta,
        Vec3::new(umax - umin, vmax - vmin, zmax - zmin),
    ))
}
