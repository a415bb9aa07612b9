//! Agreement metrics between binary masks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::Serialize;
use thiserror::Error;

use crate::volume::{Axis, Grid, LabelVolume};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("mask grids differ: {a:?} vs {b:?}")]
    GridMismatch { a: Box<Grid>, b: Box<Grid> },
    #[error("both masks are empty")]
    BothEmpty,
    #[error("mask is empty")]
    EmptyMask,
    #[error("mask is not binary (found label {0})")]
    NonBinaryMask(u8),
    #[error("need at least 2 values, got {0}")]
    TooFewValues(usize),
}

fn check_binary(mask: &LabelVolume) -> Result<(), MetricsError> {
    match mask.labels().iter().find(|&&l| l > 1) {
        Some(&l) => Err(MetricsError::NonBinaryMask(l)),
        None => Ok(()),
    }
}

fn check_pair(a: &LabelVolume, r: &LabelVolume) -> Result<(), MetricsError> {
    if !a.grid().is_compatible(r.grid()) {
        return Err(MetricsError::GridMismatch {
            a: Box::new(*a.grid()),
            b: Box::new(*r.grid()),
        });
    }
    check_binary(a)?;
    check_binary(r)
}

/// Dice similarity coefficient `2|A∩R| / (|A| + |R|)`.
///
/// Voxel counts suffice since both masks share one voxel size.
pub fn dice(a: &LabelVolume, r: &LabelVolume) -> Result<f64, MetricsError> {
    check_pair(a, r)?;
    let (mut na, mut nr, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.labels().iter().zip(r.labels()) {
        na += x as usize;
        nr += y as usize;
        both += (x & y) as usize;
    }
    if na + nr == 0 {
        return Err(MetricsError::BothEmpty);
    }
    Ok(2.0 * both as f64 / (na + nr) as f64)
}

/// Physical centers (mm) of a mask's surface voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPointSet {
    pub points: Vec<[f64; 3]>,
}

impl BoundaryPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A foreground voxel is on the boundary when one of its 6 face neighbors is
/// background or lies outside the volume.
pub fn boundary_points(mask: &LabelVolume) -> Result<BoundaryPointSet, MetricsError> {
    check_binary(mask)?;
    let g = *mask.grid();
    let [nx, ny, nz] = g.dims;
    let m = mask.labels();
    let mut points = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = g.index(x, y, z);
                if m[i] == 0 {
                    continue;
                }
                let surface = x == 0
                    || y == 0
                    || z == 0
                    || x + 1 == nx
                    || y + 1 == ny
                    || z + 1 == nz
                    || m[i - 1] == 0
                    || m[i + 1] == 0
                    || m[i - nx] == 0
                    || m[i + nx] == 0
                    || m[i - nx * ny] == 0
                    || m[i + nx * ny] == 0;
                if surface {
                    points.push(g.center_unchecked([x, y, z]));
                }
            }
        }
    }
    if points.is_empty() {
        return Err(MetricsError::EmptyMask);
    }
    Ok(BoundaryPointSet { points })
}

#[inline(always)]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Implicit k-d tree: the median of each range is the node, halves are children.
struct KdTree {
    points: Vec<[f64; 3]>,
}

/// Pruning keeps a relative margin so that no point whose computed distance
/// could undercut the current best is skipped; results match a brute-force
/// scan bit for bit.
const PRUNE_SLACK: f64 = 1e-9;

impl KdTree {
    fn new(mut points: Vec<[f64; 3]>) -> Self {
        fn build(pts: &mut [[f64; 3]], depth: usize) {
            if pts.len() <= 1 {
                return;
            }
            let axis = depth % 3;
            let mid = pts.len() / 2;
            pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
            let (left, right) = pts.split_at_mut(mid);
            build(left, depth + 1);
            build(&mut right[1..], depth + 1);
        }
        build(&mut points, 0);
        KdTree { points }
    }

    /// Squared distance from `q` to its nearest point. Returns early with any
    /// value below `good_enough` once one is found.
    fn nearest(&self, q: &[f64; 3], good_enough: f64) -> f64 {
        let mut best = f64::INFINITY;
        self.search(q, 0, self.points.len(), 0, &mut best, good_enough);
        best
    }

    fn search(
        &self,
        q: &[f64; 3],
        lo: usize,
        hi: usize,
        depth: usize,
        best: &mut f64,
        good_enough: f64,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.points[mid];
        let d = dist2(q, p);
        if d < *best {
            *best = d;
        }
        if *best < good_enough || *best == 0.0 {
            return;
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best, good_enough);
        if *best < good_enough || *best == 0.0 {
            return;
        }
        if diff * diff <= *best * (1.0 + PRUNE_SLACK) {
            self.search(q, far.0, far.1, depth + 1, best, good_enough);
        }
    }
}

/// `max over a of min over r of |a - r|`, over boundary points.
///
/// Query points are visited in a fixed pseudo-random order; a query stops as
/// soon as it finds a distance below the running maximum, since it can no
/// longer raise it.
pub fn directed_hausdorff(from: &BoundaryPointSet, to: &BoundaryPointSet) -> f64 {
    let tree = KdTree::new(to.points.clone());
    let mut order: Vec<usize> = (0..from.len()).collect();
    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed));
    let mut worst = 0.0f64;
    for i in order {
        let d = tree.nearest(&from.points[i], worst);
        if d > worst {
            worst = d;
        }
    }
    worst.sqrt()
}

/// Directed and symmetric Hausdorff distances in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HausdorffDistance {
    /// h(A, R)
    pub ar: f64,
    /// h(R, A)
    pub ra: f64,
    /// max of both directions
    pub sym: f64,
}

pub fn hausdorff(a: &LabelVolume, r: &LabelVolume) -> Result<HausdorffDistance, MetricsError> {
    check_pair(a, r)?;
    let pa = boundary_points(a)?;
    let pr = boundary_points(r)?;
    let ar = directed_hausdorff(&pa, &pr);
    let ra = directed_hausdorff(&pr, &pa);
    Ok(HausdorffDistance {
        ar,
        ra,
        sym: ar.max(ra),
    })
}

/// Min, max, mean and sample standard deviation of a list of scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgreementStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

pub fn aggregate_stats(values: &[f64]) -> Result<AgreementStats, MetricsError> {
    let n = values.len();
    if n < 2 {
        return Err(MetricsError::TooFewValues(n));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(AgreementStats {
        min,
        max,
        // Summation rounding must not push the mean outside the observed range.
        mean: mean.clamp(min, max),
        std: var.sqrt(),
    })
}

/// Bidimensional measurement of the best slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BidimensionalMeasurement {
    /// Slice index along the chosen axis.
    pub slice: usize,
    /// Longest in-plane diameter (mm).
    pub d1: f64,
    /// Extent perpendicular to the `d1` chord (mm).
    pub d2: f64,
    pub product: f64,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; collinear points are dropped.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn slice_bidimensional(pts: Vec<[f64; 2]>) -> (f64, f64) {
    let hull = convex_hull(pts);
    let mut best = (0.0f64, 0usize, 0usize);
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            let dx = hull[j][0] - hull[i][0];
            let dy = hull[j][1] - hull[i][1];
            let d = (dx * dx + dy * dy).sqrt();
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    let (d1, i, j) = best;
    if d1 == 0.0 {
        return (0.0, 0.0);
    }
    let nx = -(hull[j][1] - hull[i][1]) / d1;
    let ny = (hull[j][0] - hull[i][0]) / d1;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &hull {
        let t = p[0] * nx + p[1] * ny;
        lo = lo.min(t);
        hi = hi.max(t);
    }
    (d1, hi - lo)
}

/// Largest in-plane diameter times the perpendicular extent, maximized over
/// slices perpendicular to `axis`.
pub fn macdonald_product(
    mask: &LabelVolume,
    axis: Axis,
) -> Result<BidimensionalMeasurement, MetricsError> {
    check_binary(mask)?;
    let g = *mask.grid();
    let ax = axis.index();
    let [u, v] = axis.in_plane();
    let mut per_slice: Vec<Vec<[f64; 2]>> = vec![Vec::new(); g.dims[ax]];
    for (i, &l) in mask.labels().iter().enumerate() {
        if l == 1 {
            let p = g.coords(i);
            let c = g.center_unchecked(p);
            per_slice[p[ax]].push([c[u], c[v]]);
        }
    }
    let mut best: Option<BidimensionalMeasurement> = None;
    for (slice, pts) in per_slice.into_iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let (d1, d2) = slice_bidimensional(pts);
        let m = BidimensionalMeasurement {
            slice,
            d1,
            d2,
            product: d1 * d2,
        };
        if best.is_none_or(|b| m.product > b.product) {
            best = Some(m);
        }
    }
    best.ok_or(MetricsError::EmptyMask)
}
