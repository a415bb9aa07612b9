use std::time::Instant;

use super::rule::{normalizing_range, similarity, Strongest};
use super::{validate, GrowCutConfig, GrowCutError, RoiBox, SegmentationResult};
use crate::neighborhood::{offsets, shifted};
use crate::timing::{Phase, PhaseTimings};
use crate::volume::{Grid, LabelVolume, ScalarVolume, StrengthField};

/// Straightforward synchronous automaton over the whole volume.
///
/// Voxels outside `roi` are still visited each sweep but never updated.
pub struct NaiveEngine {
    grid: Grid,
    roi: RoiBox,
    intensity: Vec<f32>,
    labels: Vec<u8>,
    strengths: Vec<f32>,
    range: f32,
    offsets: Vec<[i32; 3]>,
    max_iters: usize,
    iterations: usize,
    converged: bool,
    timings: PhaseTimings,
    started: Instant,
}

impl NaiveEngine {
    pub fn new(
        image: &ScalarVolume,
        seeds: &LabelVolume,
        config: &GrowCutConfig,
    ) -> Result<Self, GrowCutError> {
        let started = Instant::now();
        let roi = validate(image, seeds, config)?;
        let grid = *seeds.grid();
        let intensity = image.data().to_f32();
        let range = normalizing_range(
            (0..grid.len())
                .filter(|&i| roi.contains(grid.coords(i)))
                .map(|i| intensity[i]),
        );
        let labels = seeds.labels().to_vec();
        let strengths = labels
            .iter()
            .map(|&l| if l != 0 { 1.0 } else { 0.0 })
            .collect();
        let mut timings = PhaseTimings::default();
        timings.record(Phase::Init, started.elapsed());
        Ok(NaiveEngine {
            grid,
            roi,
            intensity,
            labels,
            strengths,
            range,
            offsets: offsets(config.connectivity.count()),
            max_iters: config.resolve_max_iters(roi.dims()),
            iterations: 0,
            converged: false,
            timings,
            started,
        })
    }

    /// One full sweep. Returns the number of voxels whose state changed.
    pub fn step(&mut self) -> usize {
        let mut next_labels = self.labels.clone();
        let mut next_strengths = self.strengths.clone();
        let mut changed = 0;
        for i in 0..self.grid.len() {
            let p = self.grid.coords(i);
            if !self.roi.contains(p) {
                continue;
            }
            let mut best = Strongest::new();
            for &off in &self.offsets {
                let Some(q) = shifted(p, off, self.grid.dims) else {
                    continue;
                };
                let j = self.grid.index(q[0], q[1], q[2]);
                if self.labels[j] == 0 {
                    continue;
                }
                let g = similarity(self.intensity[i], self.intensity[j], self.range);
                best.offer(g * self.strengths[j], self.labels[j]);
            }
            if let Some((label, strength)) = best.conquers(self.strengths[i]) {
                next_labels[i] = label;
                next_strengths[i] = strength;
                changed += 1;
            }
        }
        self.labels = next_labels;
        self.strengths = next_strengths;
        self.iterations += 1;
        if changed == 0 {
            self.converged = true;
        }
        changed
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn is_converged(&self) -> bool {
        self.converged
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn strengths(&self) -> &[f32] {
        &self.strengths
    }

    pub fn run(mut self) -> SegmentationResult {
        let t = Instant::now();
        while !self.converged && self.iterations < self.max_iters {
            self.step();
        }
        self.timings.record(Phase::Iterate, t.elapsed());
        self.timings.record(Phase::Total, self.started.elapsed());
        SegmentationResult {
            labels: LabelVolume::new(self.grid, self.labels).expect("grid-sized buffer"),
            strengths: StrengthField {
                grid: self.grid,
                values: self.strengths,
            },
            iterations_run: self.iterations,
            converged: self.converged,
            roi: self.roi,
            elapsed: self.timings,
        }
    }
}
