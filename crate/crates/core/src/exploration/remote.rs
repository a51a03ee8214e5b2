//! Optional HTTP completion sampler.
//!
//! Request body: `{graph, unknown_components: [{bbox: {min, max},
//! voxel_count}], num_samples, seed}`. Expected reply: `{samples:
//! [{hypothesized_objects: [{label, box: {center, yaw, extents}}]}]}`.
//! Any failure falls back to the built-in sampler with a warning.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::completion::{sample_completions, unknown_components, CompletionRequest, MIN_COMPONENT_VOXELS};
use super::{CompletionSample, HypothesizedObject, Priors};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scene_model::GraphExport;
use crate::simulator::Vocabulary;

pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteSampler {
    pub url: String,
    pub timeout: Duration,
}

#[derive(Serialize)]
struct ComponentBox {
    min: Vec3,
    max: Vec3,
}

#[derive(Serialize)]
struct ComponentMsg {
    bbox: ComponentBox,
    voxel_count: usize,
}

#[derive(Serialize)]
struct RequestMsg<'a> {
    graph: &'a GraphExport,
    unknown_components: Vec<ComponentMsg>,
    num_samples: usize,
    seed: u64,
}

#[derive(Deserialize)]
struct SampleMsg {
    hypothesized_objects: Vec<HypothesizedObject>,
}

#[derive(Deserialize)]
struct ResponseMsg {
    samples: Vec<SampleMsg>,
}

impl RemoteSampler {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout: DEFAULT_REMOTE_TIMEOUT,
        }
    }

    fn fetch(&self, req: &CompletionRequest<'_>) -> Result<Vec<Vec<HypothesizedObject>>> {
        let export = req.graph.export();
        let body = RequestMsg {
            graph: &export,
            unknown_components: unknown_components(req.grid, MIN_COMPONENT_VOXELS)
                .into_iter()
                .map(|c| ComponentMsg {
                    bbox: ComponentBox { min: c.min, max: c.max },
                    voxel_count: c.voxels.len(),
                })
                .collect(),
            num_samples: req.num_samples,
            seed: req.seed,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let remote_err = |e: ureq::Error| Error::Configuration(format!("remote sampler {}: {e}", self.url));
        let mut resp = agent.post(&self.url).send_json(&body).map_err(remote_err)?;
        let parsed: ResponseMsg = resp.body_mut().read_json().map_err(remote_err)?;
        Ok(parsed.samples.into_iter().map(|s| s.hypothesized_objects).collect())
    }

    /// Samples from the remote endpoint; objects that contradict observed
    /// voxels are dropped. Returns an error instead of falling back.
    pub fn sample(&self, req: &CompletionRequest<'_>, vocabulary: &Vocabulary) -> Result<Vec<CompletionSample>> {
        let lists = self.fetch(req)?;
        if lists.len() < 2 {
            return Err(Error::Configuration(format!(
                "remote sampler returned {} samples, need at least 2",
                lists.len()
            )));
        }
        Ok(lists
            .into_iter()
            .map(|objs| CompletionSample::from_objects(req.grid, objs, Vec::new(), vocabulary))
            .collect())
    }
}

/// Draws completion samples from `remote` when configured, falling back to
/// the built-in sampler (with a logged warning) on any remote failure.
pub fn draw_samples(
    req: &CompletionRequest<'_>,
    priors: &Priors,
    vocabulary: &Vocabulary,
    remote: Option<&RemoteSampler>,
) -> Result<Vec<CompletionSample>> {
    if let Some(r) = remote {
        match r.sample(req, vocabulary) {
            Ok(s) => return Ok(s),
            Err(e) => log::warn!("{e}; falling back to the built-in sampler"),
        }
    }
    sample_completions(req, priors, vocabulary)
}
