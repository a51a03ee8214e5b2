//! Seeded procedural placement of furnished indoor scenes.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Aabb, Rect2, Room, SceneObject, SceneSpec, SCENE_FORMAT_VERSION};
use crate::error::{invalid, Error, Result};
use crate::geometry::{footprint_gap, intersection_volume, OrientedBox, Vec3};
use crate::rng::{rng_for, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneTemplate {
    Apartment,
    #[serde(alias = "furnished-room")]
    FurnishedRoom,
}

impl SceneTemplate {
    fn tag(self) -> u64 {
        match self {
            SceneTemplate::Apartment => 1,
            SceneTemplate::FurnishedRoom => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SceneTemplate::Apartment => "apartment",
            SceneTemplate::FurnishedRoom => "furnished_room",
        }
    }
}

impl FromStr for SceneTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "apartment" => Ok(SceneTemplate::Apartment),
            "furnished_room" | "furnished-room" => Ok(SceneTemplate::FurnishedRoom),
            other => Err(invalid(format!("unknown scene template '{other}'"))),
        }
    }
}

const WALL_HEIGHT: f64 = 2.7;
const SLAB: f64 = 0.05;
const INNER_WALL: f64 = 0.1;
const DOOR_WIDTH: f64 = 1.0;
const MAX_ATTEMPTS: u64 = 20;
/// Clearance kept around freestanding furniture so the robot can pass.
const AISLE: f64 = 0.4;
/// Shrink applied before testing interpenetration (tolerates 1 cm).
const PENETRATION_SLACK: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Place {
    Wall,
    Center,
    Free,
}

struct Furniture {
    label: &'static str,
    w: (f64, f64),
    d: (f64, f64),
    h: (f64, f64),
    place: Place,
}

const fn f(label: &'static str, w: (f64, f64), d: (f64, f64), h: (f64, f64), place: Place) -> Furniture {
    Furniture { label, w, d, h, place }
}

const FURNITURE: &[Furniture] = &[
    f("sofa", (1.8, 2.3), (0.85, 1.0), (0.8, 0.95), Place::Wall),
    f("armchair", (0.75, 0.9), (0.75, 0.9), (0.85, 1.0), Place::Free),
    f("coffee_table", (0.9, 1.3), (0.5, 0.7), (0.4, 0.48), Place::Center),
    f("tv_stand", (1.2, 1.8), (0.35, 0.45), (0.45, 0.6), Place::Wall),
    f("bookshelf", (0.8, 1.2), (0.3, 0.4), (1.6, 2.0), Place::Wall),
    f("side_table", (0.4, 0.55), (0.4, 0.55), (0.5, 0.6), Place::Free),
    f("floor_lamp", (0.3, 0.4), (0.3, 0.4), (1.5, 1.8), Place::Free),
    f("plant", (0.35, 0.5), (0.35, 0.5), (0.6, 1.2), Place::Free),
    f("cabinet", (0.8, 1.2), (0.4, 0.5), (0.8, 1.0), Place::Wall),
    f("counter", (1.6, 2.6), (0.6, 0.65), (0.88, 0.92), Place::Wall),
    f("stove", (0.6, 0.76), (0.6, 0.65), (0.88, 0.92), Place::Wall),
    f("fridge", (0.7, 0.9), (0.65, 0.75), (1.7, 1.9), Place::Wall),
    f("sink", (0.8, 1.0), (0.6, 0.65), (0.88, 0.92), Place::Wall),
    f("dining_table", (1.2, 1.8), (0.8, 1.0), (0.72, 0.78), Place::Center),
    f("chair", (0.42, 0.5), (0.45, 0.52), (0.85, 1.0), Place::Free),
    f("trash_bin", (0.3, 0.4), (0.3, 0.4), (0.5, 0.7), Place::Free),
    f("bed", (1.4, 1.8), (1.9, 2.1), (0.45, 0.6), Place::Wall),
    f("nightstand", (0.4, 0.5), (0.35, 0.45), (0.5, 0.6), Place::Wall),
    f("wardrobe", (1.0, 1.6), (0.55, 0.65), (1.9, 2.1), Place::Wall),
    f("dresser", (0.9, 1.3), (0.45, 0.55), (0.75, 0.9), Place::Wall),
    f("desk", (1.1, 1.6), (0.6, 0.75), (0.72, 0.76), Place::Wall),
    f("office_chair", (0.55, 0.65), (0.55, 0.65), (0.9, 1.1), Place::Free),
    f("filing_cabinet", (0.4, 0.5), (0.55, 0.65), (0.7, 1.3), Place::Wall),
    f("toilet", (0.38, 0.45), (0.6, 0.7), (0.7, 0.8), Place::Wall),
    f("bathtub", (1.5, 1.7), (0.7, 0.8), (0.5, 0.6), Place::Wall),
    f("vanity", (0.6, 1.0), (0.45, 0.55), (0.8, 0.9), Place::Wall),
    f("laundry_basket", (0.4, 0.5), (0.3, 0.4), (0.45, 0.55), Place::Free),
];

struct Item {
    label: &'static str,
    w: (f64, f64),
    d: (f64, f64),
    h: (f64, f64),
}

const fn it(label: &'static str, w: (f64, f64), d: (f64, f64), h: (f64, f64)) -> Item {
    Item { label, w, d, h }
}

const ITEMS: &[Item] = &[
    it("cup", (0.07, 0.09), (0.07, 0.09), (0.09, 0.11)),
    it("mug", (0.08, 0.1), (0.08, 0.1), (0.09, 0.11)),
    it("plate", (0.22, 0.27), (0.22, 0.27), (0.02, 0.03)),
    it("bowl", (0.16, 0.24), (0.16, 0.24), (0.07, 0.1)),
    it("book", (0.14, 0.2), (0.2, 0.26), (0.03, 0.05)),
    it("laptop", (0.3, 0.36), (0.22, 0.25), (0.02, 0.03)),
    it("vase", (0.1, 0.15), (0.1, 0.15), (0.2, 0.35)),
    it("bottle", (0.07, 0.09), (0.07, 0.09), (0.25, 0.32)),
    it("table_lamp", (0.2, 0.3), (0.2, 0.3), (0.35, 0.5)),
    it("remote", (0.05, 0.06), (0.15, 0.2), (0.02, 0.03)),
    it("picture_frame", (0.15, 0.25), (0.03, 0.05), (0.2, 0.3)),
    it("basket", (0.3, 0.4), (0.22, 0.3), (0.15, 0.25)),
    it("kettle", (0.18, 0.22), (0.14, 0.18), (0.22, 0.28)),
    it("toaster", (0.25, 0.3), (0.15, 0.2), (0.18, 0.22)),
    it("cutting_board", (0.3, 0.4), (0.2, 0.25), (0.02, 0.03)),
    it("pan", (0.25, 0.3), (0.25, 0.3), (0.05, 0.08)),
    it("microwave", (0.45, 0.5), (0.35, 0.4), (0.26, 0.3)),
    it("monitor", (0.5, 0.6), (0.15, 0.2), (0.35, 0.45)),
    it("keyboard", (0.4, 0.45), (0.12, 0.15), (0.02, 0.04)),
    it("alarm_clock", (0.1, 0.14), (0.06, 0.08), (0.08, 0.1)),
    it("candle", (0.06, 0.08), (0.06, 0.08), (0.1, 0.15)),
    it("soap_dispenser", (0.06, 0.08), (0.06, 0.08), (0.15, 0.2)),
    it("toothbrush_holder", (0.07, 0.09), (0.07, 0.09), (0.1, 0.12)),
    it("tv", (0.9, 1.3), (0.08, 0.12), (0.55, 0.75)),
    it("box", (0.25, 0.4), (0.2, 0.3), (0.15, 0.25)),
    it("potted_plant", (0.12, 0.18), (0.12, 0.18), (0.2, 0.3)),
    it("headphones", (0.16, 0.2), (0.08, 0.1), (0.18, 0.22)),
    it("towel", (0.3, 0.4), (0.2, 0.3), (0.05, 0.08)),
    it("apple", (0.07, 0.09), (0.07, 0.09), (0.07, 0.09)),
    it("orange", (0.07, 0.09), (0.07, 0.09), (0.07, 0.09)),
    it("toy", (0.1, 0.15), (0.1, 0.15), (0.1, 0.15)),
    it("clothes", (0.25, 0.35), (0.2, 0.25), (0.1, 0.15)),
];

fn furniture(label: &str) -> &'static Furniture {
    FURNITURE.iter().find(|f| f.label == label).expect("known furniture")
}

fn item(label: &str) -> &'static Item {
    ITEMS.iter().find(|i| i.label == label).expect("known item")
}

/// Items that may be placed on a given support surface.
fn surface_items(support: &str) -> &'static [&'static str] {
    match support {
        "coffee_table" => &[
            "cup", "mug", "book", "remote", "vase", "bowl", "plate", "candle", "laptop",
        ],
        "tv_stand" => &["remote", "picture_frame", "box", "potted_plant"],
        "bookshelf" => &["vase", "box", "picture_frame", "potted_plant", "book", "basket"],
        "side_table" => &["table_lamp", "cup", "book", "alarm_clock", "picture_frame"],
        "cabinet" => &["vase", "picture_frame", "box", "bowl", "basket", "table_lamp"],
        "counter" => &[
            "kettle",
            "toaster",
            "microwave",
            "cutting_board",
            "bowl",
            "bottle",
            "cup",
            "mug",
            "plate",
        ],
        "stove" => &["pan", "kettle"],
        "sink" => &["soap_dispenser", "cup", "bottle", "plate"],
        "dining_table" => &["plate", "cup", "bowl", "bottle", "vase", "mug"],
        "nightstand" => &["table_lamp", "alarm_clock", "book", "cup"],
        "dresser" => &["picture_frame", "box", "vase", "basket", "table_lamp"],
        "desk" => &[
            "monitor",
            "keyboard",
            "laptop",
            "mug",
            "book",
            "table_lamp",
            "headphones",
        ],
        "filing_cabinet" => &["box", "potted_plant", "book"],
        "vanity" => &["soap_dispenser", "toothbrush_holder", "towel", "bottle"],
        _ => &[],
    }
}

fn container_contents(container: &str) -> &'static [&'static str] {
    match container {
        "bowl" => &["apple", "orange"],
        "basket" => &["toy"],
        "laundry_basket" => &["clothes"],
        _ => &[],
    }
}

/// Furniture per room type: (label, min count, max count).
fn room_recipe(room_type: &str) -> &'static [(&'static str, usize, usize)] {
    match room_type {
        "living_room" => &[
            ("sofa", 1, 1),
            ("tv_stand", 1, 1),
            ("coffee_table", 1, 1),
            ("armchair", 1, 2),
            ("bookshelf", 1, 2),
            ("side_table", 1, 2),
            ("floor_lamp", 1, 1),
            ("plant", 1, 2),
            ("cabinet", 0, 1),
        ],
        "kitchen" => &[
            ("counter", 1, 2),
            ("stove", 1, 1),
            ("sink", 1, 1),
            ("fridge", 1, 1),
            ("dining_table", 1, 1),
            ("trash_bin", 1, 1),
            ("cabinet", 0, 1),
        ],
        "bedroom" => &[
            ("bed", 1, 1),
            ("nightstand", 1, 2),
            ("wardrobe", 1, 1),
            ("dresser", 1, 1),
            ("laundry_basket", 1, 1),
            ("plant", 0, 1),
            ("chair", 0, 1),
        ],
        "office" => &[
            ("desk", 1, 2),
            ("office_chair", 1, 2),
            ("bookshelf", 1, 2),
            ("filing_cabinet", 1, 2),
            ("plant", 1, 1),
            ("armchair", 0, 1),
            ("trash_bin", 0, 1),
        ],
        "bathroom" => &[
            ("toilet", 1, 1),
            ("bathtub", 1, 1),
            ("vanity", 1, 1),
            ("laundry_basket", 0, 1),
            ("trash_bin", 0, 1),
            ("cabinet", 0, 1),
        ],
        _ => &[],
    }
}

/// Large freestanding and wall furniture used for single furnished rooms.
const FURNISHED_ROOM_POOL: &[&str] = &[
    "sofa",
    "armchair",
    "coffee_table",
    "tv_stand",
    "bookshelf",
    "side_table",
    "floor_lamp",
    "plant",
    "cabinet",
    "dining_table",
    "chair",
    "bed",
    "wardrobe",
    "dresser",
    "desk",
    "office_chair",
    "filing_cabinet",
    "nightstand",
    "trash_bin",
];

fn uniform(rng: &mut SimRng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

/// Rounds to the 0.1 m lattice used for walls.
fn lattice(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

fn penetrates(a: &OrientedBox, b: &OrientedBox) -> bool {
    let shrink = |x: &OrientedBox| OrientedBox::new(x.center, x.yaw, x.extents - Vec3::repeat(2.0 * PENETRATION_SLACK));
    intersection_volume(&shrink(a), &shrink(b)) > 0.0
}

fn rect_overlaps(b: &OrientedBox, r: &Rect2) -> bool {
    let (lo, hi) = b.aabb();
    lo.x < r.max[0] && hi.x > r.min[0] && lo.y < r.max[1] && hi.y > r.min[1]
}

struct Builder {
    floor: f64,
    objects: Vec<SceneObject>,
    /// index of the container holding each object, if any
    contained_in: Vec<Option<usize>>,
    /// objects resting on the floor
    floor_objects: Vec<usize>,
    keep_out: Vec<Rect2>,
}

impl Builder {
    fn fits(&self, b: &OrientedBox, room: &Rect2, aisle: f64, ignore: Option<usize>) -> bool {
        let (lo, hi) = b.aabb();
        if lo.x < room.min[0] || hi.x > room.max[0] || lo.y < room.min[1] || hi.y > room.max[1] {
            return false;
        }
        if self.keep_out.iter().any(|r| rect_overlaps(b, r)) {
            return false;
        }
        for (i, o) in self.objects.iter().enumerate() {
            if Some(i) == ignore {
                continue;
            }
            if penetrates(b, &o.bbox) {
                return false;
            }
            if aisle > 0.0 && self.floor_objects.contains(&i) && footprint_gap(b, &o.bbox) < aisle {
                return false;
            }
        }
        true
    }

    fn push(&mut self, label: &str, b: OrientedBox, on_floor: bool, container: Option<usize>) -> usize {
        self.objects.push(SceneObject {
            label: label.to_string(),
            bbox: b,
        });
        self.contained_in.push(container);
        let idx = self.objects.len() - 1;
        if on_floor {
            self.floor_objects.push(idx);
        }
        idx
    }

    fn place_furniture(&mut self, rng: &mut SimRng, label: &str, room: &Rect2) -> Option<usize> {
        let spec = furniture(label);
        for _ in 0..60 {
            let (w, d, h) = (uniform(rng, spec.w), uniform(rng, spec.d), uniform(rng, spec.h));
            let zc = self.floor + 0.5 * h;
            let (x0, y0, x1, y1) = (room.min[0], room.min[1], room.max[0], room.max[1]);
            let candidate = match spec.place {
                Place::Wall => {
                    let side = rng.random_range(0..4);
                    let set = 0.02 + 0.5 * d;
                    match side {
                        0 | 1 => {
                            if x1 - x0 < w {
                                continue;
                            }
                            let x = rng.random_range(x0 + 0.5 * w..=x1 - 0.5 * w);
                            let y = if side == 0 { y0 + set } else { y1 - set };
                            let yaw = if side == 0 { 0.0 } else { PI };
                            OrientedBox::new(Vec3::new(x, y, zc), yaw, Vec3::new(w, d, h))
                        }
                        _ => {
                            if y1 - y0 < w {
                                continue;
                            }
                            let y = rng.random_range(y0 + 0.5 * w..=y1 - 0.5 * w);
                            let x = if side == 2 { x0 + set } else { x1 - set };
                            OrientedBox::new(Vec3::new(x, y, zc), FRAC_PI_2, Vec3::new(w, d, h))
                        }
                    }
                }
                Place::Center | Place::Free => {
                    let margin: f64 = if spec.place == Place::Center { 0.9 } else { 0.3 };
                    let r = 0.5 * (w * w + d * d).sqrt();
                    let (ax, bx) = (x0 + margin.max(r), x1 - margin.max(r));
                    let (ay, by) = (y0 + margin.max(r), y1 - margin.max(r));
                    if ax >= bx || ay >= by {
                        continue;
                    }
                    let yaw = if spec.place == Place::Center {
                        if rng.random_bool(0.5) {
                            0.0
                        } else {
                            FRAC_PI_2
                        }
                    } else {
                        rng.random_range(-PI..PI)
                    };
                    OrientedBox::new(
                        Vec3::new(rng.random_range(ax..bx), rng.random_range(ay..by), zc),
                        yaw,
                        Vec3::new(w, d, h),
                    )
                }
            };
            let aisle = if spec.place == Place::Wall { 0.0 } else { AISLE };
            if self.fits(&candidate, room, aisle, None) {
                return Some(self.push(label, candidate, true, None));
            }
        }
        None
    }

    /// Chairs tucked along the long sides of a table.
    fn place_chairs(&mut self, rng: &mut SimRng, table: usize, room: &Rect2) {
        let t = self.objects[table].bbox;
        let spec = furniture("chair");
        for side in [-1.0, 1.0] {
            for slot in [-0.25, 0.25] {
                if !rng.random_bool(0.75) {
                    continue;
                }
                let (w, d, h) = (uniform(rng, spec.w), uniform(rng, spec.d), uniform(rng, spec.h));
                let (s, c) = t.yaw.sin_cos();
                let along = slot * t.extents.x;
                let across = side * (0.5 * t.extents.y + 0.05 + 0.5 * d);
                let center = Vec3::new(
                    t.center.x + c * along - s * across,
                    t.center.y + s * along + c * across,
                    self.floor + 0.5 * h,
                );
                let b = OrientedBox::new(center, t.yaw, Vec3::new(w, d, h));
                if self.fits(&b, room, 0.0, None) {
                    self.push("chair", b, true, None);
                }
            }
        }
    }

    fn place_item_on(&mut self, rng: &mut SimRng, support: usize, label: &str) -> Option<usize> {
        let spec = item(label);
        let s = self.objects[support].bbox;
        for _ in 0..15 {
            let (w, d, h) = (uniform(rng, spec.w), uniform(rng, spec.d), uniform(rng, spec.h));
            let r = 0.5 * (w * w + d * d).sqrt();
            let (hx, hy) = (0.5 * s.extents.x - r, 0.5 * s.extents.y - r);
            if hx <= 0.0 || hy <= 0.0 {
                return None;
            }
            let (lx, ly) = (rng.random_range(-hx..hx), rng.random_range(-hy..hy));
            let (sn, cs) = s.yaw.sin_cos();
            let center = Vec3::new(
                s.center.x + cs * lx - sn * ly,
                s.center.y + sn * lx + cs * ly,
                s.zmax() + 0.5 * h,
            );
            let yaw = s.yaw + rng.random_range(-0.6..0.6);
            let b = OrientedBox::new(center, yaw, Vec3::new(w, d, h));
            let room = Rect2 {
                min: [f64::NEG_INFINITY; 2],
                max: [f64::INFINITY; 2],
            };
            if b.zmax() < self.floor + WALL_HEIGHT - 2.0 * SLAB && self.fits_ignoring_keep_out(&b, &room) {
                let idx = self.push(label, b, false, None);
                return Some(idx);
            }
        }
        None
    }

    fn fits_ignoring_keep_out(&self, b: &OrientedBox, room: &Rect2) -> bool {
        let saved = &self.keep_out;
        let (lo, hi) = b.aabb();
        if lo.x < room.min[0] || hi.x > room.max[0] || lo.y < room.min[1] || hi.y > room.max[1] {
            return false;
        }
        let _ = saved;
        !self.objects.iter().any(|o| penetrates(b, &o.bbox))
    }

    fn place_content(&mut self, rng: &mut SimRng, container: usize, label: &str) -> Option<usize> {
        let spec = item(label);
        let c = self.objects[container].bbox;
        let (w, d, h) = (uniform(rng, spec.w), uniform(rng, spec.d), uniform(rng, spec.h));
        let (w, d) = (w.min(0.8 * c.extents.x), d.min(0.8 * c.extents.y));
        let b = OrientedBox::new(
            Vec3::new(c.center.x, c.center.y, c.zmin() + 0.01 + 0.5 * h),
            c.yaw,
            Vec3::new(w, d, h),
        );
        let clash = self
            .objects
            .iter()
            .enumerate()
            .any(|(i, o)| i != container && penetrates(&b, &o.bbox));
        if clash {
            return None;
        }
        Some(self.push(label, b, false, Some(container)))
    }
}

fn outer_walls(w: f64, d: f64) -> Vec<Aabb> {
    let h = WALL_HEIGHT;
    let bx = |min: [f64; 3], max: [f64; 3]| Aabb {
        min: Vec3::from(min),
        max: Vec3::from(max),
    };
    vec![
        bx([0.0, 0.0, 0.0], [w, d, SLAB]),
        bx([0.0, 0.0, h - SLAB], [w, d, h]),
        bx([0.0, 0.0, 0.0], [SLAB, d, h]),
        bx([w - SLAB, 0.0, 0.0], [w, d, h]),
        bx([0.0, 0.0, 0.0], [w, SLAB, h]),
        bx([0.0, d - SLAB, 0.0], [w, d, h]),
    ]
}

/// Interior wall along x = `at` (axis 0) or y = `at` (axis 1) spanning
/// `[from, to]`, with a door gap centered at `door`. Returns the wall slabs
/// and keep-out rectangles on both sides of the door.
fn inner_wall(axis: usize, at: f64, from: f64, to: f64, door: f64) -> (Vec<Aabb>, Vec<Rect2>) {
    let h = WALL_HEIGHT;
    let half = 0.5 * INNER_WALL;
    let (d0, d1) = (door - 0.5 * DOOR_WIDTH, door + 0.5 * DOOR_WIDTH);
    let mut slabs = Vec::new();
    for (a, b) in [(from, d0), (d1, to)] {
        if b - a <= 1e-9 {
            continue;
        }
        let (min, max) = if axis == 0 {
            ([at - half, a, 0.0], [at + half, b, h])
        } else {
            ([a, at - half, 0.0], [b, at + half, h])
        };
        slabs.push(Aabb {
            min: Vec3::from(min),
            max: Vec3::from(max),
        });
    }
    let depth = 0.9;
    let keep = if axis == 0 {
        Rect2 {
            min: [at - depth, d0],
            max: [at + depth, d1],
        }
    } else {
        Rect2 {
            min: [d0, at - depth],
            max: [d1, at + depth],
        }
    };
    (slabs, vec![keep])
}

fn fill_items(b: &mut Builder, rng: &mut SimRng, target: usize) -> Result<()> {
    let supports: Vec<usize> = (0..b.objects.len())
        .filter(|&i| !surface_items(&b.objects[i].label).is_empty())
        .collect();
    if supports.is_empty() {
        return Err(Error::GenerationFailure("no support surfaces".into()));
    }
    // a TV on every TV stand first
    for &s in &supports {
        if b.objects[s].label == "tv_stand" && b.objects.len() < target {
            b.place_item_on(rng, s, "tv");
        }
    }
    let weights: Vec<f64> = supports
        .iter()
        .map(|&s| b.objects[s].bbox.footprint_area().sqrt())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut failures = 0;
    while b.objects.len() < target {
        let mut pick = rng.random_range(0.0..total);
        let mut chosen = supports[supports.len() - 1];
        for (k, w) in weights.iter().enumerate() {
            if pick < *w {
                chosen = supports[k];
                break;
            }
            pick -= w;
        }
        let label = *surface_items(&b.objects[chosen].label)
            .choose(rng)
            .expect("non-empty item list");
        match b.place_item_on(rng, chosen, label) {
            Some(idx) => {
                failures = 0;
                let contents = container_contents(label);
                if !contents.is_empty() && b.objects.len() < target && rng.random_bool(0.6) {
                    let c = *contents.choose(rng).expect("non-empty");
                    b.place_content(rng, idx, c);
                }
            }
            None => {
                failures += 1;
                if failures > 500 {
                    return Err(Error::GenerationFailure("support surfaces saturated".into()));
                }
            }
        }
    }
    Ok(())
}

fn build_apartment(rng: &mut SimRng, name: String) -> Result<SceneSpec> {
    let w = lattice(rng.random_range(10.0..12.5));
    let d = lattice(rng.random_range(7.5..9.5));
    let mut walls = outer_walls(w, d);
    let mut builder = Builder {
        floor: SLAB,
        objects: Vec::new(),
        contained_in: Vec::new(),
        floor_objects: Vec::new(),
        keep_out: Vec::new(),
    };

    let sx = lattice(rng.random_range(0.42 * w..0.58 * w));
    let four = rng.random_bool(0.5);
    let split_left = four || rng.random_bool(0.5);
    let split_right = four || !split_left;
    let syl = lattice(rng.random_range(0.4 * d..0.6 * d));
    let syr = lattice(rng.random_range(0.4 * d..0.6 * d));

    let door_on = |rng: &mut SimRng, a: f64, b: f64| lattice(rng.random_range(a + 0.7..b - 0.7));
    let door = door_on(rng, 0.0, d);
    let (s, k) = inner_wall(0, sx, 0.0, d, door);
    walls.extend(s);
    builder.keep_out.extend(k);

    let hw = 0.5 * INNER_WALL;
    let mut rects = Vec::new();
    if split_left {
        let door = door_on(rng, 0.0, sx);
        let (s, k) = inner_wall(1, syl, 0.0, sx, door);
        walls.extend(s);
        builder.keep_out.extend(k);
        rects.push(Rect2 {
            min: [SLAB, SLAB],
            max: [sx - hw, syl - hw],
        });
        rects.push(Rect2 {
            min: [SLAB, syl + hw],
            max: [sx - hw, d - SLAB],
        });
    } else {
        rects.push(Rect2 {
            min: [SLAB, SLAB],
            max: [sx - hw, d - SLAB],
        });
    }
    if split_right {
        let door = door_on(rng, sx, w);
        let (s, k) = inner_wall(1, syr, sx, w, door);
        walls.extend(s);
        builder.keep_out.extend(k);
        rects.push(Rect2 {
            min: [sx + hw, SLAB],
            max: [w - SLAB, syr - hw],
        });
        rects.push(Rect2 {
            min: [sx + hw, syr + hw],
            max: [w - SLAB, d - SLAB],
        });
    } else {
        rects.push(Rect2 {
            min: [sx + hw, SLAB],
            max: [w - SLAB, d - SLAB],
        });
    }

    // the largest room is the living room; the others draw distinct types
    let area = |r: &Rect2| (r.max[0] - r.min[0]) * (r.max[1] - r.min[1]);
    let largest = (0..rects.len())
        .max_by(|&a, &b| area(&rects[a]).total_cmp(&area(&rects[b])).then(b.cmp(&a)))
        .expect("rooms exist");
    let mut others = vec!["kitchen", "bedroom", "office", "bathroom"];
    let mut rooms = Vec::new();
    for (i, r) in rects.iter().enumerate() {
        let ty = if i == largest {
            "living_room"
        } else {
            let k = rng.random_range(0..others.len());
            others.remove(k)
        };
        rooms.push(Room {
            room_type: ty.to_string(),
            footprint: *r,
        });
    }

    for room in &rooms {
        for &(label, lo, hi) in room_recipe(&room.room_type) {
            let n = rng.random_range(lo..=hi);
            for _ in 0..n {
                if let Some(idx) = builder.place_furniture(rng, label, &room.footprint) {
                    if label == "dining_table" {
                        builder.place_chairs(rng, idx, &room.footprint);
                    }
                }
            }
        }
    }
    let target = rng.random_range(100..=130);
    if builder.objects.len() > target {
        return Err(Error::GenerationFailure("too much furniture".into()));
    }
    fill_items(&mut builder, rng, target)?;
    finish(name, w, d, walls, rooms, builder)
}

fn build_furnished_room(rng: &mut SimRng, name: String) -> Result<SceneSpec> {
    let w = lattice(rng.random_range(6.5..8.0));
    let d = lattice(rng.random_range(5.5..7.0));
    let walls = outer_walls(w, d);
    let mut builder = Builder {
        floor: SLAB,
        objects: Vec::new(),
        contained_in: Vec::new(),
        floor_objects: Vec::new(),
        keep_out: Vec::new(),
    };
    let room = Rect2 {
        min: [SLAB, SLAB],
        max: [w - SLAB, d - SLAB],
    };
    let target = rng.random_range(20..=30);
    let mut failures = 0;
    while builder.objects.len() < target {
        let label = *FURNISHED_ROOM_POOL.choose(rng).expect("non-empty pool");
        match builder.place_furniture(rng, label, &room) {
            Some(_) => failures = 0,
            None => {
                failures += 1;
                if failures > 200 {
                    return Err(Error::GenerationFailure("room too crowded".into()));
                }
            }
        }
    }
    let rooms = vec![Room {
        room_type: "living_room".into(),
        footprint: room,
    }];
    finish(name, w, d, walls, rooms, builder)
}

fn finish(name: String, w: f64, d: f64, walls: Vec<Aabb>, rooms: Vec<Room>, b: Builder) -> Result<SceneSpec> {
    let scene = SceneSpec {
        format_version: SCENE_FORMAT_VERSION,
        name,
        bounds: Aabb {
            min: Vec3::zeros(),
            max: Vec3::new(w, d, WALL_HEIGHT),
        },
        objects: b.objects,
        rooms,
        walls,
    };
    Ok(scene)
}

/// Generates a scene deterministically from `(template, seed)`.
///
/// Apartments have 3-4 rooms joined by doors and 100-130 objects including
/// items stacked on furniture and placed in open containers. Furnished rooms
/// are single rooms with 20-30 pieces of furniture. Apart from container
/// contents, no two boxes interpenetrate by more than 1 cm.
pub fn generate_scene(template: SceneTemplate, seed: u64) -> Result<SceneSpec> {
    let name = format!("{}-{seed}", template.as_str());
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng_for(&[0x5CE0E, template.tag(), seed, attempt]);
        let res = match template {
            SceneTemplate::Apartment => build_apartment(&mut rng, name.clone()),
            SceneTemplate::FurnishedRoom => build_furnished_room(&mut rng, name.clone()),
        };
        match res {
            Ok(s) => return Ok(s),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::GenerationFailure(format!(
        "{name}: no valid layout after {MAX_ATTEMPTS} attempts ({})",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Pairs of object indices where one sits inside an open container.
pub fn container_pairs(scene: &SceneSpec) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, o) in scene.objects.iter().enumerate() {
        if container_contents(&o.label).is_empty() {
            continue;
        }
        for (j, p) in scene.objects.iter().enumerate() {
            if i != j
                && container_contents(&o.label).contains(&p.label.as_str())
                && o.bbox.contains_point(&p.bbox.center, 0.0)
            {
                out.push((i, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::Vocabulary;

    #[test]
    fn apartment_counts_and_determinism() {
        let vocab = Vocabulary::builtin();
        for seed in 0..6 {
            let s = generate_scene(SceneTemplate::Apartment, seed).unwrap();
            assert!(
                (100..=130).contains(&s.objects.len()),
                "seed {seed}: {}",
                s.objects.len()
            );
            assert!((3..=4).contains(&s.rooms.len()));
            s.validate(&vocab).unwrap();
        }
        assert_eq!(
            generate_scene(SceneTemplate::Apartment, 3).unwrap(),
            generate_scene(SceneTemplate::Apartment, 3).unwrap()
        );
    }

    #[test]
    fn furnished_room_counts() {
        let vocab = Vocabulary::builtin();
        for seed in 0..6 {
            let s = generate_scene(SceneTemplate::FurnishedRoom, seed).unwrap();
            assert!((20..=30).contains(&s.objects.len()));
            assert_eq!(s.rooms.len(), 1);
            s.validate(&vocab).unwrap();
        }
    }

    #[test]
    fn no_interpenetration_except_containers() {
        for seed in 0..3 {
            let s = generate_scene(SceneTemplate::Apartment, seed).unwrap();
            let pairs = container_pairs(&s);
            for i in 0..s.objects.len() {
                for j in (i + 1)..s.objects.len() {
                    if pairs.contains(&(i, j)) || pairs.contains(&(j, i)) {
                        continue;
                    }
                    assert!(
                        !penetrates(&s.objects[i].bbox, &s.objects[j].bbox),
                        "{} / {}",
                        s.objects[i].label,
                        s.objects[j].label
                    );
                }
            }
        }
    }

    #[test]
    fn template_parse() {
        assert_eq!("apartment".parse::<SceneTemplate>().unwrap(), SceneTemplate::Apartment);
        assert!("castle".parse::<SceneTemplate>().is_err());
    }
}
