//! Synthetic sphere phantoms with exact ground truth.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::{Grid, LabelVolume, ScalarData, ScalarVolume};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhantomError {
    #[error("radius {radius} must be positive and below half the size {size}")]
    BadRadius { radius: f64, size: usize },
    #[error("noise sigma must be finite and >= 0, got {0}")]
    BadNoise(f64),
    #[error("size must be positive")]
    ZeroSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    /// Cube edge in voxels.
    pub size: usize,
    /// Sphere radius in voxels.
    pub radius: f64,
    pub inside: f32,
    pub outside: f32,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            size: 64,
            radius: 20.0,
            inside: 100.0,
            outside: 0.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<(), PhantomError> {
        if self.size == 0 {
            return Err(PhantomError::ZeroSize);
        }
        if !(self.radius > 0.0 && self.radius < self.size as f64 / 2.0) {
            return Err(PhantomError::BadRadius {
                radius: self.radius,
                size: self.size,
            });
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(PhantomError::BadNoise(self.noise_sigma));
        }
        Ok(())
    }

    /// Sphere center in voxel coordinates.
    pub fn center(&self) -> [f64; 3] {
        [(self.size / 2) as f64; 3]
    }

    pub fn grid(&self) -> Grid {
        Grid::isotropic([self.size; 3])
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub image: ScalarVolume,
    /// Voxels whose center lies within the radius.
    pub truth: LabelVolume,
}

fn ball(grid: Grid, center: [f64; 3], radius: f64) -> Vec<bool> {
    let r2 = radius * radius;
    (0..grid.len())
        .map(|i| {
            let p = grid.coords(i);
            let d2: f64 = (0..3).map(|a| (p[a] as f64 - center[a]).powi(2)).sum();
            d2 <= r2
        })
        .collect()
}

/// Renders the phantom. Identical specs give identical volumes.
pub fn generate(spec: &PhantomSpec) -> Result<Phantom, PhantomError> {
    spec.validate()?;
    let grid = spec.grid();
    let inside = ball(grid, spec.center(), spec.radius);
    let mut values: Vec<f32> = inside
        .iter()
        .map(|&b| if b { spec.inside } else { spec.outside })
        .collect();
    if spec.noise_sigma > 0.0 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
        for v in &mut values {
            *v += normal.sample(&mut rng) as f32;
        }
    }
    Ok(Phantom {
        image: ScalarVolume::new(grid, ScalarData::F32(values)).expect("grid-sized buffer"),
        truth: LabelVolume::new(grid, inside.into_iter().map(u8::from).collect())
            .expect("grid-sized buffer"),
    })
}

/// Foreground ball (label 1) at the center plus background (label 2) on all
/// six faces of the cube.
pub fn canonical_seeds(spec: &PhantomSpec, fg_radius: f64) -> Result<LabelVolume, PhantomError> {
    spec.validate()?;
    let grid = spec.grid();
    let fg = ball(grid, spec.center(), fg_radius.min(spec.radius));
    let n = spec.size;
    let labels = (0..grid.len())
        .map(|i| {
            let p = grid.coords(i);
            if p.iter().any(|&c| c == 0 || c + 1 == n) {
                2
            } else if fg[i] {
                1
            } else {
                0
            }
        })
        .collect();
    Ok(LabelVolume::new(grid, labels).expect("grid-sized buffer"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_count_is_frozen() {
        let p = generate(&PhantomSpec::default()).unwrap();
        let n = p.truth.count_nonzero();
        assert_eq!(n, 33401);
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * 20f64.powi(3);
        assert!((n as f64 - analytic).abs() / analytic <= 0.02);
    }

    #[test]
    fn deterministic_noise() {
        let spec = PhantomSpec {
            size: 16,
            radius: 5.0,
            noise_sigma: 4.0,
            seed: 9,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert!(a.image.data().bit_eq(b.image.data()));
        let c = generate(&PhantomSpec { seed: 10, ..spec }).unwrap();
        assert!(!a.image.data().bit_eq(c.image.data()));
    }

    #[test]
    fn rejects_oversized_radius() {
        let spec = PhantomSpec {
            radius: 40.0,
            ..Default::default()
        };
        assert!(matches!(
            generate(&spec),
            Err(PhantomError::BadRadius { .. })
        ));
        let spec = PhantomSpec {
            radius: 32.0,
            ..Default::default()
        };
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn seeds_layout() {
        let spec = PhantomSpec {
            size: 12,
            radius: 4.0,
            ..Default::default()
        };
        let s = canonical_seeds(&spec, 1.0).unwrap();
        assert_eq!(s.count_label(1), 7);
        assert_eq!(s.count_label(2), 12 * 12 * 12 - 10 * 10 * 10);
        assert_eq!(s.get(6, 6, 6), 1);
    }
}
