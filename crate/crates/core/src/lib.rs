//! Interactive 3D segmentation and volumetry.
//!
//! The crate covers the full pipeline from seeds to numbers:
//!
//! * [`volume`] and [`nrrd`]: voxel grids and a strict NRRD reader/writer.
//! * [`growcut`]: the GrowCut cellular automaton, with a region-of-interest,
//!   active-front, multi-threaded engine and a naive reference sweep.
//! * [`morphology`]: binary dilation, erosion, connected components and
//!   island removal for refining a result.
//! * [`metrics`]: Dice overlap, Hausdorff distance, agreement statistics and
//!   bidimensional (Macdonald) products.
//! * [`volumetry`]: mask volumes, slice spans and per-case comparison reports.
//! * [`phantom`]: synthetic sphere phantoms for fixtures and tests.

pub mod growcut;
pub mod metrics;
pub mod morphology;
pub mod neighborhood;
pub mod nrrd;
pub mod phantom;
pub mod timing;
pub mod volume;
pub mod volumetry;

pub use growcut::{
    growcut_run, growcut_run_naive, roi_from_seeds, GrowCutConfig, GrowCutEngine, GrowCutError,
    Neighborhood, RoiBox, SegmentationResult,
};
pub use metrics::{
    aggregate_stats, boundary_points, dice, hausdorff, macdonald_product, AgreementStats,
    BoundaryPointSet, HausdorffDistance, MetricsError,
};
pub use morphology::{
    connected_components, dilate, erode, remove_islands, IslandPolicy, MorphOp, MorphologyError,
    StructuringElement,
};
pub use nrrd::{read_labels, read_nrrd, read_scalar, write_nrrd, NrrdError};
pub use timing::{Phase, PhaseTimings};
pub use volume::{
    voxel_center_mm, Axis, Grid, LabelVolume, ScalarData, ScalarKind, ScalarVolume, StrengthField,
};
pub use volumetry::{build_report, mask_volume_mm3, slice_span, CaseReport, Report};
