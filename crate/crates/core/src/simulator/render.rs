//! Ray-cast rendering of detections and factored geometry.

use std::collections::BTreeMap;

use nalgebra::Rotation3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Aabb, NoiseModel, SceneSpec, Vocabulary, OPEN_TOP_LABELS};
use crate::error::{invalid, Result};
use crate::geometry::{anchor_poses, CameraModel, FactoredView, OrientedBox, Pose, Vec3};
use crate::rng::{rng_for, SimRng};
use crate::scene_model::{Detection, DetectionSource, Embedder, DEFAULT_EMBEDDING_DIM};

/// Wall thickness of open-top container shells.
const SHELL: f64 = 0.01;
const RENDER_STREAM: u64 = 0x52454E44;

/// Which geometry feeds the factored output. `GroundTruth` reports true
/// ranges with unit scale and exact poses, the reference variant that the
/// estimated pipeline is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometrySource {
    #[default]
    Estimated,
    GroundTruth,
}

/// First surface hit along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    /// Scene object index, `None` for walls.
    pub instance: Option<usize>,
}

#[derive(Debug, Clone)]
struct Shape {
    bbox: OrientedBox,
    open_top: bool,
    /// AABB for a quick rejection test
    lo: Vec3,
    hi: Vec3,
}

/// Ray caster over a scene's object boxes (open-top containers are hollow
/// shells) and wall slabs.
#[derive(Debug, Clone)]
pub struct SceneRaycaster {
    shapes: Vec<Shape>,
    walls: Vec<Aabb>,
    bounds: Aabb,
}

/// Entry/exit parameters of a ray against an axis-aligned box.
fn slab(o: &Vec3, d: &Vec3, lo: &Vec3, hi: &Vec3) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < lo[a] || o[a] > hi[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let (mut ta, mut tb) = ((lo[a] - o[a]) * inv, (hi[a] - o[a]) * inv);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}

impl SceneRaycaster {
    pub fn new(scene: &SceneSpec) -> Self {
        let shapes = scene
            .objects
            .iter()
            .map(|o| {
                let (lo, hi) = o.bbox.aabb();
                Shape {
                    bbox: o.bbox,
                    open_top: OPEN_TOP_LABELS.contains(&o.label.as_str()),
                    lo,
                    hi,
                }
            })
            .collect();
        Self {
            shapes,
            walls: scene.walls.clone(),
            bounds: scene.bounds,
        }
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    fn shape_entry(s: &Shape, o: &Vec3, d: &Vec3) -> Option<f64> {
        slab(o, d, &s.lo, &s.hi)?;
        let lo_ = s.bbox.to_local(o);
        let ld = s.bbox.to_local_dir(d);
        let h = s.bbox.extents * 0.5;
        let (t0, t1) = slab(&lo_, &ld, &-h, &h)?;
        if !s.open_top {
            return (t0 > 0.0).then_some(t0);
        }
        // cavity open to the top: solid = outer box minus cavity
        let wall = SHELL.min(0.25 * h.x.min(h.y));
        let c_lo = Vec3::new(-h.x + wall, -h.y + wall, -h.z + wall);
        let c_hi = Vec3::new(h.x - wall, h.y - wall, h.z + 1.0);
        let start = t0.max(0.0);
        if start > t1 {
            return None;
        }
        match slab(&lo_, &ld, &c_lo, &c_hi) {
            Some((s0, s1)) if start >= s0 && start < s1 => (s1 <= t1 && s1 > 0.0).then_some(s1),
            _ => (start > 0.0).then_some(start),
        }
    }

    /// Nearest hit with `0 < t <= max_t`; objects win exact ties with walls.
    pub fn cast(&self, origin: &Vec3, dir: &Vec3, max_t: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, s) in self.shapes.iter().enumerate() {
            if let Some(t) = Self::shape_entry(s, origin, dir) {
                if t <= max_t && best.is_none_or(|b| t < b.t) {
                    best = Some(Hit { t, instance: Some(i) });
                }
            }
        }
        for w in &self.walls {
            if let Some((t0, _)) = slab(origin, dir, &w.min, &w.max) {
                if t0 > 0.0 && t0 <= max_t && best.is_none_or(|b| t0 < b.t) {
                    best = Some(Hit { t: t0, instance: None });
                }
            }
        }
        best
    }

    /// True when `p` lies inside a wall or a (solid part of a) object box.
    pub fn inside_solid(&self, p: &Vec3) -> bool {
        self.walls.iter().any(|w| w.contains(p)) || self.shapes.iter().any(|s| s.bbox.contains_point(p, 0.0))
    }
}

/// One rendered frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub detections: Vec<Detection>,
    pub factored: FactoredView,
    pub true_pose: Pose,
    /// Ground-truth object index per pixel (`None` for walls or no hit).
    pub instance_ids: Vec<Option<usize>>,
}

/// All frames of one inference batch plus the global pose assigned to the
/// batch reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedBatch {
    pub views: Vec<RenderedView>,
    pub anchor: Pose,
}

impl RenderedBatch {
    /// Global camera poses as estimated by the perception stack.
    pub fn estimated_poses(&self) -> Result<Vec<Pose>> {
        let rel: Vec<Pose> = self.views.iter().map(|v| v.factored.relative_pose).collect();
        anchor_poses(&self.anchor, &rel)
    }
}

/// How the batch reference frame is placed in the world.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchAnchor {
    /// Calibrated camera: the first view's pose is known exactly.
    Known,
    /// Robot localization: the first view's pose carries pose noise.
    Localized,
}

/// Scene-bound renderer holding the ray caster, camera and noise model.
#[derive(Debug, Clone)]
pub struct Renderer {
    caster: SceneRaycaster,
    camera: CameraModel,
    rays: Vec<Vec3>,
    noise: NoiseModel,
    labels: Vec<String>,
    object_labels: Vec<String>,
    embedder: Embedder,
    experiment_seed: u64,
    source: GeometrySource,
}

fn normals<const N: usize>(rng: &mut SimRng) -> [f64; N] {
    std::array::from_fn(|_| StandardNormal.sample(rng))
}

fn perturb(p: &Pose, n: &[f64; 6], trans_std: f64, rot_std: f64) -> Pose {
    let mut out = *p;
    if rot_std > 0.0 {
        let dr = Rotation3::new(Vec3::new(n[0], n[1], n[2]) * rot_std);
        out.rotation = dr * out.rotation;
    }
    if trans_std > 0.0 {
        out.translation += Vec3::new(n[3], n[4], n[5]) * trans_std;
    }
    out
}

impl Renderer {
    pub fn new(
        scene: &SceneSpec,
        camera: CameraModel,
        noise: NoiseModel,
        vocabulary: &Vocabulary,
        embedder: Embedder,
        source: GeometrySource,
    ) -> Result<Self> {
        camera.validate()?;
        noise.validate()?;
        if vocabulary.labels().len() < 2 {
            return Err(invalid("label confusion needs at least two labels"));
        }
        Ok(Self {
            caster: SceneRaycaster::new(scene),
            rays: camera.rays(),
            camera,
            noise,
            labels: vocabulary.labels().to_vec(),
            object_labels: scene.objects.iter().map(|o| o.label.clone()).collect(),
            experiment_seed: embedder.seed(),
            embedder,
            source,
        })
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn caster(&self) -> &SceneRaycaster {
        &self.caster
    }

    pub fn embedder_mut(&mut self) -> &mut Embedder {
        &mut self.embedder
    }

    /// Renders one inference batch. The first pose is the batch reference;
    /// every random draw comes from a generator keyed on the experiment seed
    /// and `step_seed`.
    pub fn render_batch(
        &mut self,
        poses: &[Pose],
        step_seed: u64,
        anchor: BatchAnchor,
        sources: &[DetectionSource],
    ) -> Result<RenderedBatch> {
        if poses.is_empty() || sources.len() != poses.len() {
            return Err(invalid("a batch needs one detection source per pose"));
        }
        for p in poses {
            if !self.caster.bounds.contains(&p.translation) {
                return Err(invalid("camera pose lies outside the scene bounds"));
            }
        }
        let nz = self.noise;
        let gt = self.source == GeometrySource::GroundTruth;
        let mut rng = rng_for(&[self.experiment_seed, step_seed, RENDER_STREAM]);
        // up-to-scale depths use a power-of-two true scale so the noise-free
        // composition reproduces metric ranges exactly
        let k: i32 = rng.random_range(-2..=2);
        let scale_noise: f64 = StandardNormal.sample(&mut rng);
        let anchor_noise = normals::<6>(&mut rng);
        let (true_scale, metric_scale) = if gt {
            (1.0, 1.0)
        } else {
            let s = 2f64.powi(k);
            let m = if nz.scale_error_rel > 0.0 {
                s * (nz.scale_error_rel * scale_noise).exp()
            } else {
                s
            };
            (s, m)
        };
        let reference = poses[0];
        let reference_inv = reference.inverse();
        let anchor_pose = match anchor {
            BatchAnchor::Localized if !gt => perturb(&reference, &anchor_noise, nz.pose_trans_std, nz.pose_rot_std),
            _ => reference,
        };

        let mut views = Vec::with_capacity(poses.len());
        for (i, (pose, source)) in poses.iter().zip(sources).enumerate() {
            let pose_noise = normals::<6>(&mut rng);
            let relative = if i == 0 {
                Pose::identity()
            } else {
                let r = reference_inv.compose(pose);
                if gt {
                    r
                } else {
                    perturb(&r, &pose_noise, nz.pose_trans_std, nz.pose_rot_std)
                }
            };
            let n = self.rays.len();
            let mut depths = vec![1.0; n];
            let mut valid = vec![false; n];
            let mut ids = vec![None; n];
            for (p, ray) in self.rays.iter().enumerate() {
                let dir = pose.transform_vector(ray);
                let eps: f64 = StandardNormal.sample(&mut rng);
                if let Some(hit) = self.caster.cast(&pose.translation, &dir, self.camera.max_range) {
                    let mut d = hit.t / true_scale;
                    if !gt && nz.depth_noise_rel > 0.0 {
                        d *= (nz.depth_noise_rel * eps).exp();
                    }
                    depths[p] = d;
                    valid[p] = true;
                    ids[p] = hit.instance;
                }
            }
            let factored = FactoredView {
                width: self.camera.width,
                height: self.camera.height,
                rays: self.rays.clone(),
                depths,
                relative_pose: relative,
                metric_scale,
                valid_mask: valid,
            };
            let mut pixels: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (p, id) in ids.iter().enumerate() {
                if let Some(j) = id {
                    pixels.entry(*j).or_default().push(p);
                }
            }
            let mut detections = Vec::new();
            for (j, px) in pixels {
                if px.len() < nz.min_pixels.max(1) {
                    continue;
                }
                let u_conf: f64 = rng.random();
                let other = rng.random_range(0..self.labels.len() - 1);
                let u_drop: f64 = rng.random();
                if u_drop < nz.detection_dropout_prob {
                    continue;
                }
                let truth = self.caster_label(j);
                let label = if u_conf < nz.label_confusion_prob {
                    let candidates: Vec<&String> = self.labels.iter().filter(|l| **l != truth).collect();
                    candidates[other.min(candidates.len() - 1)].clone()
                } else {
                    truth
                };
                let embedding = self.embedder.embed(&label)?;
                detections.push(Detection {
                    label,
                    embedding,
                    points_camera: px.iter().map(|&p| factored.camera_point(p)).collect(),
                    source: *source,
                });
            }
            views.push(RenderedView {
                detections,
                factored,
                true_pose: *pose,
                instance_ids: ids,
            });
        }
        Ok(RenderedBatch {
            views,
            anchor: anchor_pose,
        })
    }

    fn caster_label(&self, j: usize) -> String {
        self.object_labels[j].clone()
    }
}

/// Renders a single frame with the builtin vocabulary and default embedding
/// dimension. The frame is its own batch, localized with pose noise.
pub fn render_view(
    scene: &SceneSpec,
    pose: &Pose,
    camera: &CameraModel,
    noise: &NoiseModel,
    experiment_seed: u64,
    step_seed: u64,
) -> Result<RenderedView> {
    let mut renderer = Renderer::new(
        scene,
        *camera,
        *noise,
        &Vocabulary::builtin(),
        Embedder::new(DEFAULT_EMBEDDING_DIM, experiment_seed),
        GeometrySource::Estimated,
    )?;
    let mut batch = renderer.render_batch(&[*pose], step_seed, BatchAnchor::Localized, &[DetectionSource::Onboard])?;
    Ok(batch.views.remove(0))
}

/// Renders a multi-view batch anchored at the known pose of its first view
/// (the external-camera case).
pub fn render_batch(
    scene: &SceneSpec,
    poses: &[Pose],
    camera: &CameraModel,
    noise: &NoiseModel,
    experiment_seed: u64,
    step_seed: u64,
) -> Result<RenderedBatch> {
    let mut renderer = Renderer::new(
        scene,
        *camera,
        *noise,
        &Vocabulary::builtin(),
        Embedder::new(DEFAULT_EMBEDDING_DIM, experiment_seed),
        GeometrySource::Estimated,
    )?;
    let sources: Vec<DetectionSource> = (0..poses.len()).map(DetectionSource::External).collect();
    renderer.render_batch(poses, step_seed, BatchAnchor::Known, &sources)
}
