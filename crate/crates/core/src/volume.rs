//! Voxel-grid data model.
//!
//! All volumes store their samples in a flat buffer, x varying fastest:
//! `index = x + y * nx + z * nx * ny`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance on spacing when testing grid compatibility.
pub const SPACING_REL_TOL: f64 = 1e-6;
/// Absolute tolerance (mm) on origin when testing grid compatibility.
pub const ORIGIN_ABS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("voxel index {index:?} out of bounds for dims {dims:?}")]
pub struct IndexOutOfBounds {
    pub index: [usize; 3],
    pub dims: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VolumeError {
    #[error("data length {actual} does not match dims {dims:?} (expected {expected})")]
    LengthMismatch {
        dims: [usize; 3],
        expected: usize,
        actual: usize,
    },
    #[error("dims must be positive, got {0:?}")]
    ZeroDim([usize; 3]),
    #[error("spacing must be positive and finite, got {0:?}")]
    BadSpacing([f64; 3]),
    #[error("origin must be finite, got {0:?}")]
    BadOrigin([f64; 3]),
}

/// Lattice description shared by every volume: size, voxel spacing (mm) and
/// the physical position of the center of voxel (0,0,0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self, VolumeError> {
        if dims.contains(&0) {
            return Err(VolumeError::ZeroDim(dims));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(VolumeError::BadSpacing(spacing));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(VolumeError::BadOrigin(origin));
        }
        Ok(Grid {
            dims,
            spacing,
            origin,
        })
    }

    /// Unit spacing, zero origin.
    pub fn isotropic(dims: [usize; 3]) -> Self {
        Grid {
            dims,
            spacing: [1.0; 3],
            origin: [0.0; 3],
        }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn contains(&self, index: [usize; 3]) -> bool {
        (0..3).all(|a| index[a] < self.dims[a])
    }

    /// Volume of a single voxel in mm³.
    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Physical center of a voxel: `origin + index * spacing` per axis.
    pub fn voxel_center_mm(&self, index: [usize; 3]) -> Result<[f64; 3], IndexOutOfBounds> {
        if !self.contains(index) {
            return Err(IndexOutOfBounds {
                index,
                dims: self.dims,
            });
        }
        Ok(self.center_unchecked(index))
    }

    #[inline]
    pub(crate) fn center_unchecked(&self, index: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + index[0] as f64 * self.spacing[0],
            self.origin[1] + index[1] as f64 * self.spacing[1],
            self.origin[2] + index[2] as f64 * self.spacing[2],
        ]
    }

    /// Equal dims, spacing within [`SPACING_REL_TOL`], origin within [`ORIGIN_ABS_TOL`].
    pub fn is_compatible(&self, other: &Grid) -> bool {
        self.dims == other.dims
            && (0..3).all(|a| {
                let (s, t) = (self.spacing[a], other.spacing[a]);
                (s - t).abs() <= SPACING_REL_TOL * s.abs().max(t.abs())
            })
            && (0..3).all(|a| (self.origin[a] - other.origin[a]).abs() <= ORIGIN_ABS_TOL)
    }
}

/// Free-function form of [`Grid::voxel_center_mm`].
pub fn voxel_center_mm(grid: &Grid, index: [usize; 3]) -> Result<[f64; 3], IndexOutOfBounds> {
    grid.voxel_center_mm(index)
}

/// A lattice axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two in-plane axes of a slice perpendicular to `self`, in ascending order.
    pub fn in_plane(self) -> [usize; 2] {
        match self {
            Axis::X => [1, 2],
            Axis::Y => [0, 2],
            Axis::Z => [0, 1],
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(format!("axis must be x, y or z, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    U8,
    I16,
    U16,
    F32,
}

impl ScalarKind {
    pub fn byte_width(self) -> usize {
        match self {
            ScalarKind::U8 => 1,
            ScalarKind::I16 | ScalarKind::U16 => 2,
            ScalarKind::F32 => 4,
        }
    }
}

/// Typed intensity buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl ScalarData {
    pub fn kind(&self) -> ScalarKind {
        match self {
            ScalarData::U8(_) => ScalarKind::U8,
            ScalarData::I16(_) => ScalarKind::I16,
            ScalarData::U16(_) => ScalarKind::U16,
            ScalarData::F32(_) => ScalarKind::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ScalarData::U8(v) => v.len(),
            ScalarData::I16(v) => v.len(),
            ScalarData::U16(v) => v.len(),
            ScalarData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get_f32(&self, i: usize) -> f32 {
        match self {
            ScalarData::U8(v) => v[i] as f32,
            ScalarData::I16(v) => v[i] as f32,
            ScalarData::U16(v) => v[i] as f32,
            ScalarData::F32(v) => v[i],
        }
    }

    pub fn to_f32(&self) -> Vec<f32> {
        match self {
            ScalarData::U8(v) => v.iter().map(|&x| x as f32).collect(),
            ScalarData::I16(v) => v.iter().map(|&x| x as f32).collect(),
            ScalarData::U16(v) => v.iter().map(|&x| x as f32).collect(),
            ScalarData::F32(v) => v.clone(),
        }
    }

    /// Bit-level equality, so NaN payloads compare equal to themselves.
    pub fn bit_eq(&self, other: &ScalarData) -> bool {
        match (self, other) {
            (ScalarData::F32(a), ScalarData::F32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => self == other,
        }
    }
}

/// A 3D intensity image with physical geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    grid: Grid,
    data: ScalarData,
}

impl ScalarVolume {
    pub fn new(grid: Grid, data: ScalarData) -> Result<Self, VolumeError> {
        let grid = Grid::new(grid.dims, grid.spacing, grid.origin)?;
        if data.len() != grid.len() {
            return Err(VolumeError::LengthMismatch {
                dims: grid.dims,
                expected: grid.len(),
                actual: data.len(),
            });
        }
        Ok(ScalarVolume { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &ScalarData {
        &self.data
    }

    pub fn kind(&self) -> ScalarKind {
        self.data.kind()
    }

    /// Minimum and maximum intensity after promotion to f32.
    pub fn intensity_range(&self) -> (f32, f32) {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for i in 0..self.data.len() {
            let v = self.data.get_f32(i);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// A 3D map of u8 label ids. Label 0 means unlabeled / background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    grid: Grid,
    labels: Vec<u8>,
}

impl LabelVolume {
    pub fn new(grid: Grid, labels: Vec<u8>) -> Result<Self, VolumeError> {
        let grid = Grid::new(grid.dims, grid.spacing, grid.origin)?;
        if labels.len() != grid.len() {
            return Err(VolumeError::LengthMismatch {
                dims: grid.dims,
                expected: grid.len(),
                actual: labels.len(),
            });
        }
        Ok(LabelVolume { grid, labels })
    }

    pub fn zeros(grid: Grid) -> Self {
        LabelVolume {
            labels: vec![0; grid.len()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.labels[self.grid.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, label: u8) {
        let i = self.grid.index(x, y, z);
        self.labels[i] = label;
    }

    /// Replace the labels, keeping the geometry.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self, VolumeError> {
        LabelVolume::new(self.grid, labels)
    }

    pub fn count_nonzero(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Binary mask (0/1) of voxels carrying `label`.
    pub fn mask_of(&self, label: u8) -> LabelVolume {
        LabelVolume {
            grid: self.grid,
            labels: self.labels.iter().map(|&l| u8::from(l == label)).collect(),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&l| l <= 1)
    }

    /// Sorted distinct nonzero label ids.
    pub fn distinct_nonzero(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (1..=255u8).filter(|&l| seen[l as usize]).collect()
    }
}

/// Per-voxel GrowCut strength in [0, 1] on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthField {
    pub grid: Grid,
    pub values: Vec<f32>,
}

impl StrengthField {
    pub fn bit_eq(&self, other: &StrengthField) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}
