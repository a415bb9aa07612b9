//! The local transition rule shared by both engines.

/// Intensity span used to normalize differences; 1 for a constant region.
pub(crate) fn normalizing_range(values: impl Iterator<Item = f32>) -> f32 {
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    if span.is_finite() && span > 0.0 {
        span
    } else {
        1.0
    }
}

/// `g(d) = max(0, 1 - d / range)`.
#[inline(always)]
pub(crate) fn similarity(a: f32, b: f32, range: f32) -> f32 {
    (1.0 - (a - b).abs() / range).max(0.0)
}

/// Running maximum over neighbor attacks.
#[derive(Clone, Copy)]
pub(crate) struct Strongest {
    force: f32,
    label: u8,
}

impl Strongest {
    #[inline(always)]
    pub(crate) fn new() -> Self {
        Strongest {
            force: -1.0,
            label: 0,
        }
    }

    /// Records an attack from a neighbor with nonzero `label`.
    #[inline(always)]
    pub(crate) fn offer(&mut self, force: f32, label: u8) {
        if force > self.force || (force == self.force && label < self.label) {
            self.force = force;
            self.label = label;
        }
    }

    /// New state for a voxel of strength `current`, if the best attack wins.
    #[inline(always)]
    pub(crate) fn conquers(self, current: f32) -> Option<(u8, f32)> {
        (self.label != 0 && self.force > current).then_some((self.label, self.force))
    }
}
