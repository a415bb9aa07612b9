//! GrowCut cellular-automaton segmentation.
//!
//! Every labeled seed voxel starts with strength 1 and every other voxel with
//! strength 0. In each iteration a voxel `p` is attacked by each labeled
//! neighbor `q` with force `g(|I_p - I_q|) * strength_q`, where
//! `g(d) = max(0, 1 - d / range)` and `range` is the intensity span of the
//! computation region (1 if that region is constant). When the strongest
//! attack strictly exceeds `strength_p`, `p` takes over the attacker's label
//! and the attack force as its new strength. Equal-force attacks from
//! different labels resolve to the smaller label id.
//!
//! Updates are synchronous: each iteration reads the previous state only, so
//! the result does not depend on visiting order or on the number of worker
//! threads. Two implementations share the local rule:
//!
//! * [`growcut_run`] crops to a region of interest around the seeds, only
//!   re-evaluates voxels next to the last iteration's changes, and splits that
//!   front into slabs processed in parallel.
//! * [`growcut_run_naive`] sweeps every voxel of the volume on one thread
//!   each iteration. It exists as a test oracle.

mod config;
mod engine;
mod naive;
mod roi;
mod rule;

pub use config::{AutoOr, GrowCutConfig, Neighborhood};
pub use engine::GrowCutEngine;
pub use naive::NaiveEngine;
pub use roi::{roi_from_seeds, RoiBox};

use serde::Serialize;
use thiserror::Error;

use crate::timing::PhaseTimings;
use crate::volume::{Grid, LabelVolume, ScalarVolume, StrengthField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrowCutError {
    #[error("image and seed grids differ: {image:?} vs {seeds:?}")]
    GridMismatch { image: Box<Grid>, seeds: Box<Grid> },
    #[error("seed volume contains no labeled voxel")]
    NoSeeds,
    #[error("insufficient seeds: need at least two distinct labels, found {found:?}")]
    InsufficientSeeds { found: Vec<u8> },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Output of a segmentation run.
#[derive(Debug, Clone)]
pub struct SegmentationResult {
    pub labels: LabelVolume,
    pub strengths: StrengthField,
    pub iterations_run: usize,
    pub converged: bool,
    pub roi: RoiBox,
    pub elapsed: PhaseTimings,
}

/// JSON-friendly digest of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub converged: bool,
    pub roi: RoiBox,
    pub elapsed: PhaseTimings,
}

impl SegmentationResult {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            iterations: self.iterations_run,
            converged: self.converged,
            roi: self.roi,
            elapsed: self.elapsed,
        }
    }
}

/// Shared precondition checks. Returns the computation region.
pub(crate) fn validate(
    image: &ScalarVolume,
    seeds: &LabelVolume,
    config: &GrowCutConfig,
) -> Result<RoiBox, GrowCutError> {
    config.validate()?;
    if !image.grid().is_compatible(seeds.grid()) {
        return Err(GrowCutError::GridMismatch {
            image: Box::new(*image.grid()),
            seeds: Box::new(*seeds.grid()),
        });
    }
    let labels = seeds.distinct_nonzero();
    if labels.is_empty() {
        return Err(GrowCutError::NoSeeds);
    }
    if labels.len() < 2 {
        return Err(GrowCutError::InsufficientSeeds { found: labels });
    }
    if config.use_roi {
        roi_from_seeds(seeds, config.roi_margin_fraction)
    } else {
        Ok(RoiBox::full(seeds.grid().dims))
    }
}

/// Optimized segmentation: ROI cropping, active-front tracking, parallel slabs.
pub fn growcut_run(
    image: &ScalarVolume,
    seeds: &LabelVolume,
    config: &GrowCutConfig,
) -> Result<SegmentationResult, GrowCutError> {
    Ok(GrowCutEngine::new(image, seeds, config)?.run())
}

/// Reference segmentation: full-volume sweep every iteration, single thread.
///
/// With `use_roi` set, voxels outside the region of interest are visited but
/// frozen, so the result is directly comparable with [`growcut_run`].
pub fn growcut_run_naive(
    image: &ScalarVolume,
    seeds: &LabelVolume,
    config: &GrowCutConfig,
) -> Result<SegmentationResult, GrowCutError> {
    Ok(NaiveEngine::new(image, seeds, config)?.run())
}
