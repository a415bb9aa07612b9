//! Shared fixtures for the benches.

use growcut_core::phantom::{canonical_seeds, generate, PhantomSpec};
use growcut_core::{Grid, LabelVolume, ScalarVolume};

/// Noisy sphere phantom of edge `size` with its canonical seeds and truth.
pub fn phantom(size: usize, noise_sigma: f64) -> (ScalarVolume, LabelVolume, LabelVolume) {
    let spec = PhantomSpec {
        size,
        radius: size as f64 * 0.3,
        noise_sigma,
        seed: 1,
        ..PhantomSpec::default()
    };
    let p = generate(&spec).expect("valid phantom spec");
    let seeds = canonical_seeds(&spec, 3.0).expect("valid phantom spec");
    (p.image, seeds, p.truth)
}

/// `truth` shifted by `shift` voxels along x, for metric benches.
pub fn shifted(truth: &LabelVolume, shift: usize) -> LabelVolume {
    let grid: Grid = *truth.grid();
    let [nx, ny, nz] = grid.dims;
    let mut out = LabelVolume::zeros(grid);
    for z in 0..nz {
        for y in 0..ny {
            for x in shift..nx {
                out.set(x, y, z, truth.get(x - shift, y, z));
            }
        }
    }
    out
}
