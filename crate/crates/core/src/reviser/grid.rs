use serde::{Deserialize, Serialize};

use crate::efsm::ActionBin;
use crate::error::{Error, Result};

/// Uniform discretization of a continuous acceleration interval.
///
/// Bins are half-open `[lo, hi)` except the last, which is closed at
/// `a_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    a_min: f64,
    a_max: f64,
    delta: f64,
    bins: usize,
}

impl ActionGrid {
    pub fn new(a_min: f64, a_max: f64, delta: f64) -> Result<Self> {
        if !(a_min.is_finite() && a_max.is_finite() && a_max > a_min && delta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "action grid [{a_min}, {a_max}] with width {delta}"
            )));
        }
        let ratio = (a_max - a_min) / delta;
        let bins = ratio.round();
        if bins < 1.0 || (ratio - bins).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "bin width {delta} does not divide [{a_min}, {a_max}]"
            )));
        }
        Ok(ActionGrid {
            a_min,
            a_max,
            delta,
            bins: bins as usize,
        })
    }

    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Bin containing `a`, after clamping `a` into the interval.
    pub fn encode(&self, a: f64) -> ActionBin {
        let a = a.clamp(self.a_min, self.a_max);
        let q = self.bins as f64;
        let k = ((a - self.a_min) * q / (self.a_max - self.a_min)).floor() as usize;
        ActionBin::new(k.min(self.bins - 1) + 1)
    }

    /// Midpoint of a bin.
    pub fn decode(&self, bin: ActionBin) -> f64 {
        assert!(bin.get() <= self.bins, "{bin} outside a grid of {} bins", self.bins);
        // Interpolating between the bounds keeps values such as 0.3 exact.
        let q2 = 2.0 * self.bins as f64;
        let up = (2 * bin.get() - 1) as f64;
        (self.a_min * (q2 - up) + self.a_max * up) / q2
    }

    /// Lower and upper edge of a bin.
    pub fn bounds(&self, bin: ActionBin) -> (f64, f64) {
        let q = self.bins as f64;
        let r = bin.get() as f64;
        let lerp = |k: f64| (self.a_min * (q - k) + self.a_max * k) / q;
        (lerp(r - 1.0), lerp(r))
    }
}
