//! Binary morphology on 0/1 label volumes.
//!
//! Voxels outside the volume count as background for both dilation and
//! erosion, so erosion always strips voxels touching the volume edge.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neighborhood::{offsets, shifted};
use crate::volume::{Grid, LabelVolume};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorphologyError {
    #[error("mask is not binary (found label {0})")]
    NonBinaryMask(u8),
    #[error("mask is empty")]
    EmptyMask,
    #[error("connectivity must be 6, 18 or 26, got {0}")]
    InvalidConnectivity(u8),
    #[error("iteration count must be positive")]
    ZeroIterations,
    #[error("unknown morphology op {0:?}")]
    UnknownOp(String),
}

/// Radius-1 structuring element given by its neighborhood size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct StructuringElement {
    connectivity: u8,
}

impl StructuringElement {
    pub const FACE: StructuringElement = StructuringElement { connectivity: 6 };
    pub const EDGE: StructuringElement = StructuringElement { connectivity: 18 };
    pub const VERTEX: StructuringElement = StructuringElement { connectivity: 26 };

    pub fn new(connectivity: u8) -> Result<Self, MorphologyError> {
        match connectivity {
            6 | 18 | 26 => Ok(StructuringElement { connectivity }),
            other => Err(MorphologyError::InvalidConnectivity(other)),
        }
    }

    pub fn connectivity(self) -> u8 {
        self.connectivity
    }
}

impl Default for StructuringElement {
    fn default() -> Self {
        StructuringElement::FACE
    }
}

impl TryFrom<u8> for StructuringElement {
    type Error = MorphologyError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        StructuringElement::new(v)
    }
}

impl From<StructuringElement> for u8 {
    fn from(se: StructuringElement) -> u8 {
        se.connectivity
    }
}

fn check_binary(mask: &LabelVolume) -> Result<(), MorphologyError> {
    match mask.labels().iter().find(|&&l| l > 1) {
        Some(&l) => Err(MorphologyError::NonBinaryMask(l)),
        None => Ok(()),
    }
}

/// One pass of a neighborhood filter, computed slab-by-slab in parallel.
fn filter_once(grid: &Grid, src: &[u8], offs: &[[i32; 3]], erode: bool) -> Vec<u8> {
    let [nx, ny, _] = grid.dims;
    let mut out = vec![0u8; src.len()];
    out.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slab)| {
            for y in 0..ny {
                for x in 0..nx {
                    let i = grid.index(x, y, z);
                    let me = src[i] == 1;
                    let value = if erode {
                        me && offs
                            .iter()
                            .all(|&o| match shifted([x, y, z], o, grid.dims) {
                                Some(q) => src[grid.index(q[0], q[1], q[2])] == 1,
                                None => false,
                            })
                    } else {
                        me || offs
                            .iter()
                            .any(|&o| match shifted([x, y, z], o, grid.dims) {
                                Some(q) => src[grid.index(q[0], q[1], q[2])] == 1,
                                None => false,
                            })
                    };
                    slab[x + nx * y] = u8::from(value);
                }
            }
        });
    out
}

fn repeat(
    mask: &LabelVolume,
    se: StructuringElement,
    iterations: usize,
    erode: bool,
) -> Result<LabelVolume, MorphologyError> {
    check_binary(mask)?;
    if iterations == 0 {
        return Err(MorphologyError::ZeroIterations);
    }
    let offs = offsets(se.connectivity);
    let mut cur = mask.labels().to_vec();
    for _ in 0..iterations {
        cur = filter_once(mask.grid(), &cur, &offs, erode);
    }
    Ok(mask.with_labels(cur).expect("same grid"))
}

/// Sets a voxel when it or any neighbor is set, `iterations` times.
pub fn dilate(
    mask: &LabelVolume,
    se: StructuringElement,
    iterations: usize,
) -> Result<LabelVolume, MorphologyError> {
    repeat(mask, se, iterations, false)
}

/// Keeps a voxel only when it and every neighbor are set, `iterations` times.
pub fn erode(
    mask: &LabelVolume,
    se: StructuringElement,
    iterations: usize,
) -> Result<LabelVolume, MorphologyError> {
    repeat(mask, se, iterations, true)
}

/// Per-voxel component ids (0 = background, 1..=K) and per-component sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub ids: Vec<u32>,
    /// `counts[k]` is the size of component `k + 1`.
    pub counts: Vec<usize>,
}

impl Components {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Labels connected foreground regions. Ids follow the scan order of each
/// component's first voxel.
pub fn connected_components(
    mask: &LabelVolume,
    se: StructuringElement,
) -> Result<Components, MorphologyError> {
    check_binary(mask)?;
    let grid = mask.grid();
    let src = mask.labels();
    let offs = offsets(se.connectivity);
    let mut ids = vec![0u32; src.len()];
    let mut counts = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..src.len() {
        if src[start] == 0 || ids[start] != 0 {
            continue;
        }
        let id = counts.len() as u32 + 1;
        ids[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let p = grid.coords(i);
            for &o in &offs {
                if let Some(q) = shifted(p, o, grid.dims) {
                    let j = grid.index(q[0], q[1], q[2]);
                    if src[j] == 1 && ids[j] == 0 {
                        ids[j] = id;
                        queue.push_back(j);
                    }
                }
            }
        }
        counts.push(size);
    }
    Ok(Components { ids, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IslandPolicy {
    /// Keep the biggest component; the lower id wins ties.
    KeepLargest,
    /// Keep components with at least this many voxels.
    MinSize(usize),
}

pub fn remove_islands(
    mask: &LabelVolume,
    se: StructuringElement,
    policy: IslandPolicy,
) -> Result<LabelVolume, MorphologyError> {
    let comps = connected_components(mask, se)?;
    let keep: Vec<bool> = match policy {
        IslandPolicy::KeepLargest => {
            let mut best = None::<(usize, usize)>;
            for (k, &c) in comps.counts.iter().enumerate() {
                if best.is_none_or(|(_, bc)| c > bc) {
                    best = Some((k, c));
                }
            }
            let (winner, _) = best.ok_or(MorphologyError::EmptyMask)?;
            (0..comps.len()).map(|k| k == winner).collect()
        }
        IslandPolicy::MinSize(n) => comps.counts.iter().map(|&c| c >= n).collect(),
    };
    let labels = comps
        .ids
        .iter()
        .map(|&id| u8::from(id != 0 && keep[id as usize - 1]))
        .collect();
    Ok(mask.with_labels(labels).expect("same grid"))
}

/// A single refinement step, as spelled on the command line and in the HTTP API.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphOp {
    Dilate,
    Erode,
    KeepLargest,
    MinSize(usize),
}

impl FromStr for MorphOp {
    type Err = MorphologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "dilate" => Ok(MorphOp::Dilate),
            "erode" => Ok(MorphOp::Erode),
            "keep-largest" => Ok(MorphOp::KeepLargest),
            other => other
                .strip_prefix("min-size=")
                .and_then(|n| n.parse().ok())
                .map(MorphOp::MinSize)
                .ok_or_else(|| MorphologyError::UnknownOp(other.to_string())),
        }
    }
}

impl fmt::Display for MorphOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MorphOp::Dilate => f.write_str("dilate"),
            MorphOp::Erode => f.write_str("erode"),
            MorphOp::KeepLargest => f.write_str("keep-largest"),
            MorphOp::MinSize(n) => write!(f, "min-size={n}"),
        }
    }
}

/// Parses a comma-separated op list such as `dilate,erode,erode`.
pub fn parse_ops(list: &str) -> Result<Vec<MorphOp>, MorphologyError> {
    list.split(',').map(str::parse).collect()
}

/// Applies ops left to right.
pub fn apply_ops(
    mask: &LabelVolume,
    ops: &[MorphOp],
    se: StructuringElement,
) -> Result<LabelVolume, MorphologyError> {
    check_binary(mask)?;
    let mut cur = mask.clone();
    for op in ops {
        cur = match *op {
            MorphOp::Dilate => dilate(&cur, se, 1)?,
            MorphOp::Erode => erode(&cur, se, 1)?,
            MorphOp::KeepLargest => remove_islands(&cur, se, IslandPolicy::KeepLargest)?,
            MorphOp::MinSize(n) => remove_islands(&cur, se, IslandPolicy::MinSize(n))?,
        };
    }
    Ok(cur)
}
