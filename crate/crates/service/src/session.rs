//! Session state and the mutations a client can apply to it.
//!
//! Every mutating call is expressed as a [`Mutation`] so the same code path
//! serves live requests and journal replay.

use growcut_core::growcut::RunSummary;
use growcut_core::morphology::{apply_ops, MorphOp};
use growcut_core::nrrd::parse_nrrd;
use growcut_core::{
    growcut_run, mask_volume_mm3, slice_span, Axis, GrowCutConfig, GrowCutError, LabelVolume,
    MorphologyError, NrrdError, PhaseTimings, ScalarVolume, StructuringElement,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Nrrd(#[from] NrrdError),
    #[error("invalid stroke {index}: {reason}")]
    InvalidStroke { index: usize, reason: String },
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Segment(#[from] GrowCutError),
    #[error(transparent)]
    Morph(#[from] MorphologyError),
    #[error("no segmentation result yet")]
    NoResult,
}

/// One brush stroke painted on a single slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stroke {
    pub axis: Axis,
    pub slice_index: usize,
    /// In-plane voxel coordinates `[u, v]` along the axis' in-plane dimensions.
    pub polyline: Vec<[f64; 2]>,
    pub brush_radius_mm: f64,
    /// 1 foreground, 2 background, 0 erase.
    pub label: u8,
}

impl Stroke {
    fn check(&self, dims: [usize; 3]) -> Result<(), String> {
        let depth = dims[self.axis.index()];
        if self.slice_index >= depth {
            return Err(format!(
                "slice_index {} out of range for axis {:?} (size {depth})",
                self.slice_index, self.axis
            ));
        }
        if self.polyline.is_empty() {
            return Err("polyline is empty".into());
        }
        if self.polyline.iter().flatten().any(|c| !c.is_finite()) {
            return Err("polyline has a non-finite coordinate".into());
        }
        if !(self.brush_radius_mm.is_finite() && self.brush_radius_mm >= 0.0) {
            return Err(format!(
                "brush_radius_mm must be >= 0, got {}",
                self.brush_radius_mm
            ));
        }
        if self.label > 2 {
            return Err(format!("label must be 0, 1 or 2, got {}", self.label));
        }
        Ok(())
    }
}

fn seg_dist2(c: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ac = [c[0] - a[0], c[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ac[0] * ab[0] + ac[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [ac[0] - t * ab[0], ac[1] - t * ab[1]];
    d[0] * d[0] + d[1] * d[1]
}

/// Writes `stroke.label` into every voxel of the stroke's slice whose center
/// lies within the brush radius of the polyline, measured in-plane in mm.
pub fn rasterize(seeds: &mut LabelVolume, stroke: &Stroke) {
    let grid = *seeds.grid();
    let [au, av] = stroke.axis.in_plane();
    let (su, sv) = (grid.spacing[au], grid.spacing[av]);
    let (nu, nv) = (grid.dims[au], grid.dims[av]);
    let pts: Vec<[f64; 2]> = stroke
        .polyline
        .iter()
        .map(|p| [p[0] * su, p[1] * sv])
        .collect();
    let r = stroke.brush_radius_mm;
    let r2 = r * r;

    // Candidate box, padded by a voxel so rounding never clips the disk.
    let range = |k: usize, s: f64, n: usize| -> Option<(usize, usize)> {
        let lo = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        let lo = ((lo - r) / s).floor() - 1.0;
        let hi = ((hi + r) / s).ceil() + 1.0;
        if hi < 0.0 || lo > (n - 1) as f64 {
            return None;
        }
        Some((lo.max(0.0) as usize, hi.min((n - 1) as f64) as usize))
    };
    let (Some((u0, u1)), Some((v0, v1))) = (range(0, su, nu), range(1, sv, nv)) else {
        return;
    };

    let segments: Vec<([f64; 2], [f64; 2])> = if pts.len() == 1 {
        vec![(pts[0], pts[0])]
    } else {
        pts.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let labels = seeds.labels_mut();
    for v in v0..=v1 {
        for u in u0..=u1 {
            let c = [u as f64 * su, v as f64 * sv];
            if segments.iter().any(|&(a, b)| seg_dist2(c, a, b) <= r2) {
                let mut p = [0usize; 3];
                p[stroke.axis.index()] = stroke.slice_index;
                p[au] = u;
                p[av] = v;
                labels[grid.index(p[0], p[1], p[2])] = stroke.label;
            }
        }
    }
}

fn default_connectivity() -> u8 {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphRequest {
    pub ops: Vec<String>,
    #[serde(default = "default_connectivity")]
    pub connectivity: u8,
}

/// A state-changing call, as recorded in the journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Mutation {
    Strokes { strokes: Vec<Stroke> },
    Segment { config: GrowCutConfig },
    Morph(MorphRequest),
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Strokes {
        revision: u64,
        labeled_voxel_count: usize,
    },
    Segment {
        #[serde(flatten)]
        summary: RunSummary,
        revision: u64,
    },
    Morph {
        revision: u64,
        volume_mm3: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SessionResult {
    pub summary: RunSummary,
    /// Current foreground mask; morphology edits replace it.
    pub mask: LabelVolume,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub volume_mm3: f64,
    pub slice_span: usize,
    pub iterations: usize,
    pub elapsed: PhaseTimings,
    pub revision: u64,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub volume: ScalarVolume,
    pub seeds: LabelVolume,
    pub result: Option<SessionResult>,
    pub revision: u64,
}

impl Session {
    pub fn new(volume: ScalarVolume) -> Self {
        let seeds = LabelVolume::zeros(*volume.grid());
        Session {
            volume,
            seeds,
            result: None,
            revision: 0,
        }
    }

    pub fn from_nrrd(bytes: &[u8]) -> Result<Self, SessionError> {
        Ok(Session::new(parse_nrrd(bytes)?.into_scalar()?))
    }

    /// Applies `m`. On error the session is left unchanged.
    pub fn apply(&mut self, m: &Mutation) -> Result<Outcome, SessionError> {
        match m {
            Mutation::Strokes { strokes } => {
                let dims = self.seeds.grid().dims;
                for (index, s) in strokes.iter().enumerate() {
                    s.check(dims)
                        .map_err(|reason| SessionError::InvalidStroke { index, reason })?;
                }
                for s in strokes {
                    rasterize(&mut self.seeds, s);
                }
                self.revision += 1;
                Ok(Outcome::Strokes {
                    revision: self.revision,
                    labeled_voxel_count: self.seeds.count_nonzero(),
                })
            }
            Mutation::Segment { config } => {
                let res = growcut_run(&self.volume, &self.seeds, config)?;
                let summary = res.summary();
                self.result = Some(SessionResult {
                    mask: res.labels.mask_of(1),
                    summary: summary.clone(),
                });
                self.revision += 1;
                Ok(Outcome::Segment {
                    summary,
                    revision: self.revision,
                })
            }
            Mutation::Morph(req) => {
                let ops = req
                    .ops
                    .iter()
                    .map(|s| s.parse::<MorphOp>())
                    .collect::<Result<Vec<_>, _>>()?;
                let se = StructuringElement::new(req.connectivity)?;
                let result = self.result.as_mut().ok_or(SessionError::NoResult)?;
                result.mask = apply_ops(&result.mask, &ops, se)?;
                self.revision += 1;
                Ok(Outcome::Morph {
                    revision: self.revision,
                    volume_mm3: mask_volume_mm3(&result.mask),
                })
            }
        }
    }

    /// The label layer: the result mask once a segmentation exists, else the seeds.
    pub fn label_layer(&self) -> &LabelVolume {
        self.result.as_ref().map_or(&self.seeds, |r| &r.mask)
    }

    pub fn stats(&self, axis: Axis) -> Result<Stats, SessionError> {
        let r = self.result.as_ref().ok_or(SessionError::NoResult)?;
        Ok(Stats {
            volume_mm3: mask_volume_mm3(&r.mask),
            slice_span: slice_span(&r.mask, axis),
            iterations: r.summary.iterations,
            elapsed: r.summary.elapsed,
            revision: self.revision,
        })
    }

    pub fn result_mask(&self) -> Result<&LabelVolume, SessionError> {
        self.result
            .as_ref()
            .map(|r| &r.mask)
            .ok_or(SessionError::NoResult)
    }
}
