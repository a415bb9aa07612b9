use std::time::Instant;

use rayon::prelude::*;

use super::rule::{normalizing_range, similarity, Strongest};
use super::{validate, GrowCutConfig, GrowCutError, RoiBox, SegmentationResult};
use crate::neighborhood::{offsets, shifted};
use crate::timing::{Phase, PhaseTimings};
use crate::volume::{Grid, LabelVolume, ScalarVolume, StrengthField};

/// Fronts smaller than this are evaluated on the calling thread.
const PARALLEL_MIN_FRONT: usize = 4096;
/// Lower bound on slab size handed to a worker.
const MIN_SLAB: usize = 1024;

/// Cropped working copy of the region of interest.
struct Region {
    dims: [usize; 3],
    intensity: Vec<f32>,
    labels: Vec<u8>,
    strengths: Vec<f32>,
    range: f32,
    offsets: Vec<[i32; 3]>,
    /// Linear index deltas matching `offsets`, valid away from the region border.
    deltas: Vec<isize>,
}

impl Region {
    #[inline]
    fn coords(&self, i: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    #[inline]
    fn interior(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] >= 1 && p[a] + 1 < self.dims[a])
    }

    #[inline]
    fn for_each_neighbor(&self, i: usize, mut f: impl FnMut(usize)) {
        let p = self.coords(i);
        if self.interior(p) {
            for &d in &self.deltas {
                f((i as isize + d) as usize);
            }
        } else {
            let [nx, ny, _] = self.dims;
            for &off in &self.offsets {
                if let Some(q) = shifted(p, off, self.dims) {
                    f(q[0] + nx * (q[1] + ny * q[2]));
                }
            }
        }
    }

    /// Next state of voxel `i` given the current buffers, if it changes.
    #[inline]
    fn evaluate(&self, i: usize) -> Option<(u8, f32)> {
        let own = self.intensity[i];
        let mut best = Strongest::new();
        self.for_each_neighbor(i, |j| {
            let label = self.labels[j];
            if label != 0 {
                let g = similarity(own, self.intensity[j], self.range);
                best.offer(g * self.strengths[j], label);
            }
        });
        best.conquers(self.strengths[i])
    }
}

/// Optimized GrowCut engine.
///
/// Each [`step`](Self::step) evaluates only the active front: unsaturated
/// voxels adjacent to a voxel that changed in the previous step (initially,
/// adjacent to a seed). Voxels with strength 1 can never be conquered and are
/// left out. The front is kept sorted, so splitting it into contiguous chunks
/// yields disjoint slabs of the region that workers evaluate against the
/// previous state before any update is applied.
pub struct GrowCutEngine {
    grid: Grid,
    seeds: Vec<u8>,
    roi: RoiBox,
    region: Region,
    front: Vec<u32>,
    stamp: Vec<u32>,
    pool: Option<rayon::ThreadPool>,
    workers: usize,
    max_iters: usize,
    iterations: usize,
    converged: bool,
    timings: PhaseTimings,
    started: Instant,
}

impl GrowCutEngine {
    pub fn new(
        image: &ScalarVolume,
        seeds: &LabelVolume,
        config: &GrowCutConfig,
    ) -> Result<Self, GrowCutError> {
        let started = Instant::now();
        let roi = validate(image, seeds, config)?;
        let grid = *seeds.grid();
        let dims = roi.dims();
        let n = roi.len();
        if n > u32::MAX as usize {
            return Err(GrowCutError::InvalidConfig(format!(
                "region of {n} voxels exceeds the supported size"
            )));
        }

        let mut intensity = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let data = image.data();
        for z in roi.lo[2]..=roi.hi[2] {
            for y in roi.lo[1]..=roi.hi[1] {
                let row = grid.index(roi.lo[0], y, z);
                for i in row..row + dims[0] {
                    intensity.push(data.get_f32(i));
                    labels.push(seeds.labels()[i]);
                }
            }
        }
        let strengths: Vec<f32> = labels
            .iter()
            .map(|&l| if l != 0 { 1.0 } else { 0.0 })
            .collect();
        let range = normalizing_range(intensity.iter().copied());

        let offsets = offsets(config.connectivity.count());
        let deltas = offsets
            .iter()
            .map(|o| {
                o[0] as isize
                    + dims[0] as isize * (o[1] as isize + dims[1] as isize * o[2] as isize)
            })
            .collect();
        let region = Region {
            dims,
            intensity,
            labels,
            strengths,
            range,
            offsets,
            deltas,
        };

        // Seeds act as the changes of step zero.
        let mut stamp = vec![u32::MAX; n];
        let mut front = Vec::new();
        for i in 0..n {
            if region.labels[i] != 0 {
                region.for_each_neighbor(i, |j| {
                    if region.strengths[j] < 1.0 && stamp[j] != 0 {
                        stamp[j] = 0;
                        front.push(j as u32);
                    }
                });
            }
        }
        front.sort_unstable();

        let workers = config.resolve_workers();
        let pool = if workers > 1 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .ok()
        } else {
            None
        };

        let mut timings = PhaseTimings::default();
        timings.record(Phase::Init, started.elapsed());
        Ok(GrowCutEngine {
            grid,
            seeds: seeds.labels().to_vec(),
            roi,
            region,
            front,
            stamp,
            pool,
            workers,
            max_iters: config.resolve_max_iters(dims),
            iterations: 0,
            converged: false,
            timings,
            started,
        })
    }

    /// Number of voxels that the next step will re-evaluate. Zero once converged.
    pub fn active_front_size(&self) -> usize {
        self.front.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn is_converged(&self) -> bool {
        self.converged
    }

    pub fn roi(&self) -> RoiBox {
        self.roi
    }

    /// Advances one synchronous iteration. Returns the number of changed voxels.
    pub fn step(&mut self) -> usize {
        self.iterations += 1;
        let front = std::mem::take(&mut self.front);
        let region = &self.region;
        let eval = |&i: &u32| region.evaluate(i as usize).map(|(l, s)| (i, l, s));

        let updates: Vec<(u32, u8, f32)> = match &self.pool {
            Some(pool) if front.len() >= PARALLEL_MIN_FRONT => {
                let slab = front.len().div_ceil(self.workers * 4).max(MIN_SLAB);
                pool.install(|| {
                    front
                        .par_chunks(slab)
                        .map(|chunk| chunk.iter().filter_map(eval).collect::<Vec<_>>())
                        .collect::<Vec<_>>()
                })
                .concat()
            }
            _ => front.iter().filter_map(eval).collect(),
        };

        for &(i, label, strength) in &updates {
            self.region.labels[i as usize] = label;
            self.region.strengths[i as usize] = strength;
        }

        let mark = self.iterations as u32;
        let mut next = front;
        next.clear();
        for &(i, _, _) in &updates {
            let region = &self.region;
            let stamp = &mut self.stamp;
            region.for_each_neighbor(i as usize, |j| {
                if region.strengths[j] < 1.0 && stamp[j] != mark {
                    stamp[j] = mark;
                    next.push(j as u32);
                }
            });
        }
        next.sort_unstable();
        self.front = next;

        if updates.is_empty() {
            self.converged = true;
        }
        updates.len()
    }

    /// Full-volume labels for the current state.
    pub fn labels(&self) -> Vec<u8> {
        let mut out = self.seeds.clone();
        self.scatter(&self.region.labels, &mut out);
        out
    }

    /// Full-volume strengths for the current state.
    pub fn strengths(&self) -> Vec<f32> {
        let mut out: Vec<f32> = self
            .seeds
            .iter()
            .map(|&l| if l != 0 { 1.0 } else { 0.0 })
            .collect();
        self.scatter(&self.region.strengths, &mut out);
        out
    }

    fn scatter<T: Copy>(&self, local: &[T], full: &mut [T]) {
        let nx = self.region.dims[0];
        let mut k = 0;
        for z in self.roi.lo[2]..=self.roi.hi[2] {
            for y in self.roi.lo[1]..=self.roi.hi[1] {
                let row = self.grid.index(self.roi.lo[0], y, z);
                full[row..row + nx].copy_from_slice(&local[k..k + nx]);
                k += nx;
            }
        }
    }

    /// Iterates until no voxel changes or the iteration cap is reached.
    pub fn run(mut self) -> SegmentationResult {
        let t = Instant::now();
        while !self.converged && self.iterations < self.max_iters {
            self.step();
        }
        self.timings.record(Phase::Iterate, t.elapsed());
        let labels = self.labels();
        let strengths = self.strengths();
        self.timings.record(Phase::Total, self.started.elapsed());
        SegmentationResult {
            labels: LabelVolume::new(self.grid, labels).expect("grid-sized buffer"),
            strengths: StrengthField {
                grid: self.grid,
                values: strengths,
            },
            iterations_run: self.iterations,
            converged: self.converged,
            roi: self.roi,
            elapsed: self.timings,
        }
    }
}
