//! The shipped experiment suites.

use super::{ExperimentConfig, ExternalCameras, SceneSource};
use crate::simulator::SceneTemplate;

/// Ten apartments (seeds 0-9), one start pose each.
pub fn apartment_suite(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    (0..10)
        .map(|seed| ExperimentConfig {
            scene: SceneSource::generated(SceneTemplate::Apartment, seed),
            start_index: 0,
            ..base.clone()
        })
        .collect()
}

/// Seven scenes: furnished rooms 0-3 and apartments 0-2.
pub fn standard_suite(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let rooms = (0..4).map(|s| SceneSource::generated(SceneTemplate::FurnishedRoom, s));
    let apartments = (0..3).map(|s| SceneSource::generated(SceneTemplate::Apartment, s));
    rooms
        .chain(apartments)
        .map(|scene| ExperimentConfig { scene, ..base.clone() })
        .collect()
}

/// Static external-camera runs with `cameras` overhead cameras over ten
/// seeds of each template.
pub fn camera_count_suite(base: &ExperimentConfig, cameras: usize) -> Vec<ExperimentConfig> {
    [SceneTemplate::Apartment, SceneTemplate::FurnishedRoom]
        .into_iter()
        .flat_map(|t| (0..10).map(move |seed| SceneSource::generated(t, seed)))
        .map(|scene| ExperimentConfig {
            scene,
            static_only: true,
            external_cameras: ExternalCameras::overhead(cameras),
            ..base.clone()
        })
        .collect()
}
