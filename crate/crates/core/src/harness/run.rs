//! The perception-action loop.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::association::{associate_detections, consolidate_nodes};
use crate::error::{Error, Result};
use crate::evaluation::{compute_metrics, match_nodes, write_steps_csv, StepRecord};
use crate::exploration::{
    draw_samples, select_nbv_frontier, select_nbv_random, select_nbv_semantic, CompletionRequest, PlannerKind, Priors,
    RemoteSampler, Selection,
};
use crate::geometry::{integrate_scan, Pose, Vec3, VoxelGrid};
use crate::relations::infer_edges;
use crate::rng::{mix_seed, rng_for};
use crate::scene_model::{DetectionSource, Embedder, GraphExport, SceneGraph};
use crate::simulator::{navigable_viewpoints, BatchAnchor, RenderedBatch, Renderer, SceneSpec, ViewpointSet};

const EXTERNAL_STREAM: u64 = 0xE7;
const ROBOT_STREAM: u64 = 0x0B;
const SAMPLE_STREAM: u64 = 0x5A;
const START_STREAM: u64 = 0x57A7;

/// Planner bookkeeping for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLogEntry {
    pub step: usize,
    pub planner: String,
    pub selected_viewpoint: usize,
    pub selected_score: f64,
    pub candidates: usize,
    /// Up to five best `(viewpoint id, score)` pairs.
    pub top: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub graph: GraphExport,
    pub records: Vec<StepRecord>,
    pub score_log: Vec<ScoreLogEntry>,
    /// Why the loop ended before the configured step count, if it did.
    pub stopped_early: Option<String>,
    pub scene: SceneSpec,
}

/// The scene's start viewpoints: a seeded permutation of the navigable
/// positions (one heading each), truncated to `count`.
pub fn start_poses(scene: &SceneSpec, viewpoints: &ViewpointSet, count: usize) -> Vec<usize> {
    let key: Vec<u64> = scene.name.bytes().map(u64::from).chain([START_STREAM]).collect();
    let mut rng = rng_for(&[mix_seed(&key)]);
    let mut ids: Vec<usize> = viewpoints.viewpoints.iter().map(|v| v.id).collect();
    ids.shuffle(&mut rng);
    // at most one start per position
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for id in ids {
        let p = viewpoints.viewpoints[id].position();
        if seen.iter().any(|q: &Vec3| (q - p).norm() < 1e-9) {
            continue;
        }
        seen.push(p);
        out.push(id);
        if out.len() == count {
            break;
        }
    }
    out
}

struct Loop<'a> {
    cfg: &'a ExperimentConfig,
    scene: SceneSpec,
    renderer: Renderer,
    grid: VoxelGrid,
    graph: SceneGraph,
    records: Vec<StepRecord>,
    started: Instant,
}

impl Loop<'_> {
    fn process(&mut self, batch: &RenderedBatch) -> Result<()> {
        let poses = batch.estimated_poses()?;
        for (view, pose) in batch.views.iter().zip(&poses) {
            let f = &view.factored;
            let points: Vec<Vec3> = (0..f.rays.len())
                .filter(|&p| f.valid_mask[p])
                .map(|p| pose.transform_point(&f.camera_point(p)))
                .collect();
            integrate_scan(&mut self.grid, &pose.translation, &points);
            associate_detections(&mut self.graph, &view.detections, pose, &self.cfg.association)?;
        }
        Ok(())
    }

    fn record(&mut self, step: usize, selection: Option<&Selection>, travel: f64) -> Result<()> {
        infer_edges(&mut self.graph, &self.cfg.relations)?;
        self.graph.step = step as u64;
        let matching = match_nodes(&self.graph, &self.scene, &self.cfg.matching, self.cfg.experiment_seed)?;
        let m = compute_metrics(matching.len(), self.graph.len(), self.scene.objects.len())?;
        self.records.push(StepRecord {
            step,
            planner: self.cfg.planner.planner.as_str().to_string(),
            nodes_pred: self.graph.len(),
            nodes_gt: self.scene.objects.len(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            selected_viewpoint: selection.map(|s| s.viewpoint),
            selected_score: selection.map_or(0.0, |s| s.score),
            travel_m: travel,
            wall_ms: if self.cfg.record_timing {
                self.started.elapsed().as_millis() as u64
            } else {
                0
            },
        });
        Ok(())
    }
}

/// Runs one experiment. Step 0 processes the external cameras (one batch
/// anchored at the first camera's known pose) and the robot's view from its
/// start pose; each later step selects a viewpoint, moves there, observes
/// and updates the graph. Nothing downstream of rendering sees ground-truth
/// depth or poses.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let vocabulary = cfg.load_vocabulary()?;
    let priors = match &cfg.priors {
        Some(p) => Priors::load(p)?,
        None => Priors::builtin(),
    };
    priors.validate(&vocabulary)?;
    let scene = cfg.scene.load(&vocabulary)?;
    scene.validate(&vocabulary)?;
    let viewpoints = navigable_viewpoints(&scene, cfg.viewpoint_spacing, cfg.viewpoint_headings)?;
    let external = cfg.external_cameras.resolve(&scene)?;
    let remote = cfg.remote_sampler.as_ref().map(RemoteSampler::new);
    let seed = cfg.experiment_seed;

    let renderer = Renderer::new(
        &scene,
        cfg.camera,
        cfg.noise,
        &vocabulary,
        Embedder::new(cfg.embedding_dim, seed),
        cfg.geometry,
    )?;
    let grid = VoxelGrid::covering(scene.bounds.min, scene.bounds.max, cfg.voxel_resolution)?;
    let mut lp = Loop {
        cfg,
        renderer,
        grid,
        graph: SceneGraph::new(),
        records: Vec::new(),
        started: Instant::now(),
        scene,
    };

    if !external.is_empty() {
        let sources: Vec<DetectionSource> = (0..external.len()).map(DetectionSource::External).collect();
        let batch =
            lp.renderer
                .render_batch(&external, mix_seed(&[0, EXTERNAL_STREAM]), BatchAnchor::Known, &sources)?;
        lp.process(&batch)?;
    }

    let mut score_log = Vec::new();
    let mut stopped_early = None;
    if cfg.static_only {
        lp.record(0, None, 0.0)?;
    } else {
        let starts = start_poses(&lp.scene, &viewpoints, cfg.num_start_poses);
        let start = *starts
            .get(cfg.start_index)
            .ok_or_else(|| Error::Configuration(format!("scene offers only {} start poses", starts.len())))?;
        let mut current = start;
        let mut pose: Pose = viewpoints.viewpoints[current].pose;
        let observe = |lp: &mut Loop, pose: &Pose, step: usize| -> Result<()> {
            let batch = lp.renderer.render_batch(
                std::slice::from_ref(pose),
                mix_seed(&[step as u64, ROBOT_STREAM]),
                BatchAnchor::Localized,
                &[DetectionSource::Onboard],
            )?;
            lp.process(&batch)
        };
        observe(&mut lp, &pose, 0)?;
        lp.record(0, None, 0.0)?;

        let mut travel = 0.0;
        let bounds = lp.scene.bounds;
        let floor = lp.scene.floor_height();
        for step in 1..=cfg.steps {
            let selection = match cfg.planner.planner {
                PlannerKind::Frontier => select_nbv_frontier(&lp.grid, &viewpoints, &pose, Some(current), &cfg.planner),
                PlannerKind::Random => select_nbv_random(&lp.grid, &viewpoints, Some(current), seed, step as u64),
                PlannerKind::Semantic => {
                    let req = CompletionRequest {
                        graph: &lp.graph,
                        grid: &lp.grid,
                        bounds,
                        floor_height: floor,
                        num_samples: cfg.planner.num_samples,
                        seed: mix_seed(&[seed, step as u64, SAMPLE_STREAM]),
                    };
                    let samples = draw_samples(&req, &priors, &vocabulary, remote.as_ref())?;
                    select_nbv_semantic(&samples, &lp.grid, &viewpoints, &pose, Some(current), &cfg.planner)
                }
            };
            let selection = match selection {
                Ok(s) => s,
                Err(e @ (Error::ExplorationComplete | Error::ExplorationExhausted)) => {
                    log::info!("stopping at step {step}: {e}");
                    stopped_early = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            };
            let next = viewpoints.viewpoints[selection.viewpoint].pose;
            travel += (next.translation - pose.translation).norm();
            current = selection.viewpoint;
            pose = next;
            let mut top = selection.scores.clone();
            top.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            top.truncate(5);
            score_log.push(ScoreLogEntry {
                step,
                planner: cfg.planner.planner.as_str().to_string(),
                selected_viewpoint: selection.viewpoint,
                selected_score: selection.score,
                candidates: selection.scores.len(),
                top,
            });
            observe(&mut lp, &pose, step)?;
            if step % cfg.consolidate_every == 0 {
                consolidate_nodes(&mut lp.graph, &cfg.association)?;
            }
            lp.record(step, Some(&selection), travel)?;
        }
    }

    let result = RunResult {
        graph: lp.graph.export(),
        records: lp.records,
        score_log,
        stopped_early,
        scene: lp.scene,
    };
    if let Some(dir) = &cfg.output_dir {
        write_outputs(dir, cfg, &result)?;
    }
    Ok(result)
}

/// Writes `steps.csv`, `graph_final.json`, `config.json` and `scores.jsonl`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, result: &RunResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: Vec<u8>| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    let mut csv = Vec::new();
    write_steps_csv(&mut csv, &result.records).expect("in-memory write");
    write("steps.csv", csv)?;
    let graph = serde_json::to_string_pretty(&result.graph).expect("graph serializes") + "\n";
    write("graph_final.json", graph.into_bytes())?;
    write("config.json", cfg.to_json().into_bytes())?;
    let mut log = Vec::new();
    for e in &result.score_log {
        writeln!(log, "{}", serde_json::to_string(e).expect("log entry serializes")).expect("in-memory write");
    }
    write("scores.jsonl", log)?;
    Ok(())
}
