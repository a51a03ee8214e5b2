//! Experiment configuration, the perception-action loop, and aggregation
//! of per-step results across runs.

mod report;
mod run;
mod suites;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use report::{aggregate_dirs, aggregate_records, find_step_files, write_report_csv, ReportRow, REPORT_HEADER};
pub use run::{run_experiment, start_poses, write_outputs, RunResult, ScoreLogEntry};
pub use suites::{apartment_suite, camera_count_suite, standard_suite};

use crate::association::AssociationThresholds;
use crate::error::{Error, Result};
use crate::evaluation::MatchThresholds;
use crate::exploration::PlannerConfig;
use crate::geometry::{CameraModel, Pose};
use crate::relations::RelationThresholds;
use crate::scene_model::DEFAULT_EMBEDDING_DIM;
use crate::simulator::{generate_scene, GeometrySource, NoiseModel, SceneSpec, SceneTemplate, Vocabulary};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Where the ground-truth scene comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneSource {
    Generated { template: SceneTemplate, seed: u64 },
    File { file: PathBuf },
}

impl SceneSource {
    pub fn generated(template: SceneTemplate, seed: u64) -> Self {
        SceneSource::Generated { template, seed }
    }

    pub fn load(&self, vocabulary: &Vocabulary) -> Result<SceneSpec> {
        match self {
            SceneSource::Generated { template, seed } => generate_scene(*template, *seed),
            SceneSource::File { file } => SceneSpec::load(file, vocabulary),
        }
    }
}

/// External cameras: explicit poses or a named preset resolved against the
/// scene (`overhead-1` .. `overhead-4`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExternalCameras {
    Preset(String),
    Poses(Vec<Pose>),
}

impl Default for ExternalCameras {
    fn default() -> Self {
        ExternalCameras::Poses(Vec::new())
    }
}

impl ExternalCameras {
    pub fn overhead(count: usize) -> Self {
        ExternalCameras::Preset(format!("overhead-{count}"))
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, ExternalCameras::Poses(p) if p.is_empty())
    }

    fn preset_count(name: &str) -> Result<usize> {
        name.strip_prefix("overhead-")
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|n| (1..=4).contains(n))
            .ok_or_else(|| Error::Configuration(format!("unknown external camera preset '{name}'")))
    }

    pub fn resolve(&self, scene: &SceneSpec) -> Result<Vec<Pose>> {
        match self {
            ExternalCameras::Preset(name) => Ok(scene.overhead_cameras(Self::preset_count(name)?)),
            ExternalCameras::Poses(p) => Ok(p.clone()),
        }
    }

    /// Parses a CLI value: a preset name or a JSON file with a pose list.
    pub fn from_arg(arg: &str) -> Result<Self> {
        if arg.starts_with("overhead-") {
            Self::preset_count(arg)?;
            return Ok(ExternalCameras::Preset(arg.to_string()));
        }
        let path = Path::new(arg);
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let poses: Vec<Pose> = serde_json::from_str(&text).map_err(|e| Error::parse(path, &text, e))?;
        Ok(ExternalCameras::Poses(poses))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub scene: SceneSource,
    pub planner: PlannerConfig,
    pub noise: NoiseModel,
    pub camera: CameraModel,
    pub association: AssociationThresholds,
    pub relations: RelationThresholds,
    pub matching: MatchThresholds,
    pub steps: usize,
    pub num_start_poses: usize,
    /// Which of the scene's `num_start_poses` start poses this run uses.
    pub start_index: usize,
    pub external_cameras: ExternalCameras,
    pub experiment_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub remote_sampler: Option<String>,
    /// Only process the external cameras (no robot, no exploration).
    pub static_only: bool,
    /// Which geometry feeds the pipeline (estimated or ground truth).
    pub geometry: GeometrySource,
    /// Record wall-clock milliseconds in steps.csv. Off by default so
    /// repeated runs produce identical files.
    pub record_timing: bool,
    pub viewpoint_spacing: f64,
    pub viewpoint_headings: usize,
    pub voxel_resolution: f64,
    pub embedding_dim: usize,
    pub consolidate_every: usize,
    pub priors: Option<PathBuf>,
    pub vocabulary: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            scene: SceneSource::generated(SceneTemplate::Apartment, 0),
            planner: PlannerConfig::default(),
            noise: NoiseModel::default(),
            camera: CameraModel::default(),
            association: AssociationThresholds::default(),
            relations: RelationThresholds::default(),
            matching: MatchThresholds::default(),
            steps: 30,
            num_start_poses: 10,
            start_index: 0,
            external_cameras: ExternalCameras::default(),
            experiment_seed: 0,
            output_dir: None,
            remote_sampler: None,
            static_only: false,
            geometry: GeometrySource::Estimated,
            record_timing: false,
            viewpoint_spacing: 0.5,
            viewpoint_headings: 8,
            voxel_resolution: 0.1,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            consolidate_every: 5,
            priors: None,
            vocabulary: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::InvalidArgument(m) => Error::Configuration(m),
            other => other,
        };
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::Configuration(format!(
                "unsupported config format_version {} (expected {CONFIG_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.steps == 0 {
            return Err(Error::Configuration("steps must be at least 1".into()));
        }
        if self.num_start_poses == 0 || self.start_index >= self.num_start_poses {
            return Err(Error::Configuration("start_index must be below num_start_poses".into()));
        }
        if self.consolidate_every == 0 {
            return Err(Error::Configuration("consolidate_every must be at least 1".into()));
        }
        if !(self.voxel_resolution > 0.0) || !(self.viewpoint_spacing > 0.0) || self.viewpoint_headings == 0 {
            return Err(Error::Configuration(
                "grid resolutions and heading count must be positive".into(),
            ));
        }
        if self.embedding_dim < 8 {
            return Err(Error::Configuration("embedding_dim must be at least 8".into()));
        }
        if self.static_only && self.external_cameras.is_empty() {
            return Err(Error::Configuration(
                "static runs need at least one external camera".into(),
            ));
        }
        self.planner.validate().map_err(cfg)?;
        self.noise.validate().map_err(cfg)?;
        self.camera.validate().map_err(cfg)?;
        self.association.validate().map_err(cfg)?;
        self.relations.validate().map_err(cfg)?;
        self.matching.validate().map_err(cfg)?;
        for (what, p) in [("priors", &self.priors), ("vocabulary", &self.vocabulary)] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::Configuration(format!(
                        "{what} file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        if let SceneSource::File { file } = &self.scene {
            if !file.exists() {
                return Err(Error::Configuration(format!(
                    "scene file {} does not exist",
                    file.display()
                )));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: impl AsRef<Path>) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::parse(origin.as_ref(), text, e))?;
        c.validate()?;
        Ok(c)
    }

    /// Loads and validates a JSON config. Relative scene, priors and
    /// vocabulary paths are resolved against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::parse(path, &text, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let SceneSource::File { file } = &mut c.scene {
            fix(file);
        }
        if let Some(p) = c.priors.as_mut() {
            fix(p);
        }
        if let Some(p) = c.vocabulary.as_mut() {
            fix(p);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn load_vocabulary(&self) -> Result<Vocabulary> {
        match &self.vocabulary {
            Some(p) => Vocabulary::load(p),
            None => Ok(Vocabulary::builtin()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::parse(&c.to_json(), "echo").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c = ExperimentConfig::parse(
            r#"{"format_version": 1, "scene": {"template": "furnished_room", "seed": 2}, "steps": 3,
                "external_cameras": "overhead-1", "planner": {"planner": "frontier"}}"#,
            "inline",
        )
        .unwrap();
        assert_eq!(c.steps, 3);
        assert_eq!(c.scene, SceneSource::generated(SceneTemplate::FurnishedRoom, 2));
        assert_eq!(c.planner.num_samples, 8);
        assert_eq!(c.external_cameras, ExternalCameras::overhead(1));
    }

    #[test]
    fn parse_errors_carry_line_context() {
        let text = "{\n  \"format_version\": 1,\n  \"steps\": \"many\"\n}";
        match ExperimentConfig::parse(text, "cfg.json") {
            Err(Error::Parse { line, context, .. }) => {
                assert_eq!(line, 3);
                assert!(context.contains("\"many\""));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_configuration_errors() {
        for text in [
            r#"{"format_version": 2}"#,
            r#"{"format_version": 1, "steps": 0}"#,
            r#"{"format_version": 1, "planner": {"num_samples": 1}}"#,
            r#"{"format_version": 1, "static_only": true}"#,
            r#"{"format_version": 1, "scene": {"file": "/nonexistent/scene.json"}}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::parse(text, "x"), Err(Error::Configuration(_))),
                "{text}"
            );
        }
        assert!(ExperimentConfig::parse(r#"{"format_version": 1, "bogus": 1}"#, "x").is_err());
    }

    #[test]
    fn external_presets() {
        let scene = generate_scene(SceneTemplate::FurnishedRoom, 0).unwrap();
        assert_eq!(ExternalCameras::overhead(3).resolve(&scene).unwrap().len(), 3);
        assert!(ExternalCameras::from_arg("overhead-9").is_err());
        assert!(ExternalCameras::Preset("sideways".into()).resolve(&scene).is_err());
    }
}
