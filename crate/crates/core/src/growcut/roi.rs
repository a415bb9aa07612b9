use serde::{Deserialize, Serialize};

use super::GrowCutError;
use crate::volume::LabelVolume;

/// Inclusive axis-aligned voxel box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl RoiBox {
    pub fn full(dims: [usize; 3]) -> Self {
        RoiBox {
            lo: [0; 3],
            hi: [dims[0] - 1, dims[1] - 1, dims[2] - 1],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            self.hi[0] - self.lo[0] + 1,
            self.hi[1] - self.lo[1] + 1,
            self.hi[2] - self.lo[2] + 1,
        ]
    }

    pub fn len(&self) -> usize {
        let d = self.dims();
        d[0] * d[1] * d[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= p[a] && p[a] <= self.hi[a])
    }
}

/// Bounding box of all labeled voxels, grown on each side of each axis by
/// `max(1, ceil(margin_fraction * extent))` voxels and clamped to the volume.
pub fn roi_from_seeds(seeds: &LabelVolume, margin_fraction: f64) -> Result<RoiBox, GrowCutError> {
    let grid = seeds.grid();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for (i, &l) in seeds.labels().iter().enumerate() {
        if l == 0 {
            continue;
        }
        any = true;
        let c = grid.coords(i);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    if !any {
        return Err(GrowCutError::NoSeeds);
    }
    for a in 0..3 {
        let extent = (hi[a] - lo[a] + 1) as f64;
        let margin = ((margin_fraction * extent).ceil() as usize).max(1);
        lo[a] = lo[a].saturating_sub(margin);
        hi[a] = (hi[a] + margin).min(grid.dims[a] - 1);
    }
    Ok(RoiBox { lo, hi })
}
