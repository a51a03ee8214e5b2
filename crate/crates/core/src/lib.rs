//! Active construction of 3D scene graphs from RGB-only perception.
//!
//! The crate is organized around the perception-action loop:
//!
//! * [`simulator`] renders synthetic scenes into instance detections and
//!   factored geometry (rays, up-to-scale depths, relative poses, metric scale).
//! * [`geometry`] composes factored outputs into metric point clouds, fits
//!   gravity-aligned boxes and maintains the voxel occupancy map.
//! * [`association`] fuses detections into persistent object nodes.
//! * [`relations`] derives spatial edges from box geometry alone.
//! * [`exploration`] picks the next best view, either by frontier visibility
//!   or by expected information gain over sampled scene completions.
//! * [`evaluation`] scores node predictions against ground truth.
//! * [`harness`] wires everything into reproducible experiments.

// Parameter checks are written as `!(x > 0.0)` on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod error;
pub mod evaluation;
pub mod exploration;
pub mod geometry;
pub mod harness;
pub mod relations;
pub mod rng;
pub mod scene_model;
pub mod simulator;

pub use error::{Error, Result};
