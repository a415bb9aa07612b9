//! Wall-clock phase timings attached to segmentation runs and reports.

use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Init,
    Iterate,
    Refine,
    Total,
}

fn secs<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
    match d {
        Some(d) => s.serialize_f64(d.as_secs_f64()),
        None => s.serialize_none(),
    }
}

/// Durations per phase. A phase that was never timed stays `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhaseTimings {
    #[serde(
        rename = "init_s",
        serialize_with = "secs",
        skip_serializing_if = "Option::is_none"
    )]
    pub init: Option<Duration>,
    #[serde(
        rename = "iterate_s",
        serialize_with = "secs",
        skip_serializing_if = "Option::is_none"
    )]
    pub iterate: Option<Duration>,
    #[serde(
        rename = "refine_s",
        serialize_with = "secs",
        skip_serializing_if = "Option::is_none"
    )]
    pub refine: Option<Duration>,
    #[serde(
        rename = "total_s",
        serialize_with = "secs",
        skip_serializing_if = "Option::is_none"
    )]
    pub total: Option<Duration>,
}

impl PhaseTimings {
    pub fn get(&self, phase: Phase) -> Option<Duration> {
        match phase {
            Phase::Init => self.init,
            Phase::Iterate => self.iterate,
            Phase::Refine => self.refine,
            Phase::Total => self.total,
        }
    }

    fn slot(&mut self, phase: Phase) -> &mut Option<Duration> {
        match phase {
            Phase::Init => &mut self.init,
            Phase::Iterate => &mut self.iterate,
            Phase::Refine => &mut self.refine,
            Phase::Total => &mut self.total,
        }
    }

    /// Adds `d` to the phase, opening it if needed.
    pub fn record(&mut self, phase: Phase, d: Duration) {
        let slot = self.slot(phase);
        *slot = Some(slot.unwrap_or_default() + d);
    }

    /// Runs `f`, charging its wall-clock time to `phase`.
    pub fn scope<T>(&mut self, phase: Phase, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.record(phase, start.elapsed());
        out
    }
}
