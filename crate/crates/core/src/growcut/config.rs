use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::GrowCutError;

/// Neighborhood used by the automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Neighborhood {
    /// Face neighbors.
    Six,
    /// Full Moore neighborhood.
    #[default]
    TwentySix,
}

impl Neighborhood {
    pub fn count(self) -> u8 {
        match self {
            Neighborhood::Six => 6,
            Neighborhood::TwentySix => 26,
        }
    }
}

impl TryFrom<u8> for Neighborhood {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            6 => Ok(Neighborhood::Six),
            26 => Ok(Neighborhood::TwentySix),
            other => Err(format!("connectivity must be 6 or 26, got {other}")),
        }
    }
}

impl Serialize for Neighborhood {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.count())
    }
}

impl<'de> Deserialize<'de> for Neighborhood {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Neighborhood::try_from(v).map_err(serde::de::Error::custom)
    }
}

/// A positive count, or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AutoOr {
    #[default]
    Auto,
    Value(usize),
}

impl AutoOr {
    pub fn resolve(self, auto: impl FnOnce() -> usize) -> usize {
        match self {
            AutoOr::Auto => auto(),
            AutoOr::Value(v) => v,
        }
    }
}

impl fmt::Display for AutoOr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoOr::Auto => f.write_str("auto"),
            AutoOr::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for AutoOr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(AutoOr::Auto);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!(
                "expected a positive integer or \"auto\", got {s:?}"
            )),
            Ok(v) => Ok(AutoOr::Value(v)),
        }
    }
}

impl Serialize for AutoOr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AutoOr::Auto => s.serialize_str("auto"),
            AutoOr::Value(v) => s.serialize_u64(*v as u64),
        }
    }
}

impl<'de> Deserialize<'de> for AutoOr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(0) => Err(serde::de::Error::custom("count must be positive")),
            Repr::Num(n) => Ok(AutoOr::Value(n as usize)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Run parameters. Missing JSON fields take the defaults below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowCutConfig {
    pub connectivity: Neighborhood,
    /// `auto` resolves to the sum of the region's dims plus 8.
    pub max_iters: AutoOr,
    /// Per-side ROI margin as a fraction of the seed extent along each axis.
    pub roi_margin_fraction: f64,
    pub use_roi: bool,
    /// `auto` resolves to the machine's available parallelism.
    pub worker_count: AutoOr,
}

impl Default for GrowCutConfig {
    fn default() -> Self {
        GrowCutConfig {
            connectivity: Neighborhood::TwentySix,
            max_iters: AutoOr::Auto,
            roi_margin_fraction: 0.05,
            use_roi: true,
            worker_count: AutoOr::Auto,
        }
    }
}

impl GrowCutConfig {
    pub fn validate(&self) -> Result<(), GrowCutError> {
        if !(self.roi_margin_fraction.is_finite() && self.roi_margin_fraction >= 0.0) {
            return Err(GrowCutError::InvalidConfig(format!(
                "roi_margin_fraction must be >= 0, got {}",
                self.roi_margin_fraction
            )));
        }
        if self.max_iters == AutoOr::Value(0) || self.worker_count == AutoOr::Value(0) {
            return Err(GrowCutError::InvalidConfig(
                "max_iters and worker_count must be positive".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn resolve_max_iters(&self, region_dims: [usize; 3]) -> usize {
        self.max_iters
            .resolve(|| region_dims[0] + region_dims[1] + region_dims[2] + 8)
    }

    pub(crate) fn resolve_workers(&self) -> usize {
        self.worker_count.resolve(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }
}
