//! Evolving finite state machine.
//!
//! States are discovered online as clusters of normalized observations. Each
//! discrete action owns a transition probability matrix over the current state
//! set, identified recursively from consecutive state distributions and grown
//! by one row and one column whenever a new state appears.

mod cluster;
mod model;
mod transition;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cluster::{ClusterSet, ClusterState, StateUpdate};
pub use model::{EvolvingModel, ModelSnapshot, StateSnapshot, TransitionSnapshot};
pub use transition::TransitionModel;

/// Upper bound of the speed range, m/s. Shared by both vehicles.
pub const SPEED_RANGE: f64 = 32.0;
/// Upper bound of the headway range, m.
pub const HEADWAY_RANGE: f64 = 200.0;

/// Scales `[ego speed, headway, lead speed]` into the unit cube, clamping
/// out-of-range components to the nearest bound.
pub fn normalize_observation(raw: [f64; 3]) -> [f64; 3] {
    let scale = |x: f64, range: f64| (x / range).clamp(0.0, 1.0);
    [
        scale(raw[0], SPEED_RANGE),
        scale(raw[1], HEADWAY_RANGE),
        scale(raw[2], SPEED_RANGE),
    ]
}

/// Attribution of a state with respect to the control criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    #[default]
    None,
    /// A collision happened while this state was the most probable one.
    UnfavorableSafety,
    /// The headway exceeded its limit while this state was the most probable one.
    UnfavorableSpeed,
}

impl Flag {
    pub fn is_unfavorable(self) -> bool {
        self != Flag::None
    }
}

/// 1-based index of a discrete action bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionBin(usize);

impl ActionBin {
    /// Panics on zero; bins are numbered from 1.
    pub fn new(bin: usize) -> Self {
        assert!(bin >= 1, "action bins are 1-based");
        ActionBin(bin)
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub(crate) fn offset(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for ActionBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a({})", self.0)
    }
}

/// Probability distribution over the current state set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbDist(Vec<f64>);

impl ProbDist {
    /// Normalizes non-negative weights. Returns `None` when the weights are
    /// empty, contain a negative or non-finite entry, or sum to zero.
    pub fn from_weights(weights: Vec<f64>) -> Option<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return None;
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return None;
        }
        Some(ProbDist(weights.into_iter().map(|w| w / total).collect()))
    }

    /// All mass on `index`.
    pub fn one_hot(len: usize, index: usize) -> Self {
        assert!(index < len);
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        ProbDist(probs)
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0);
        ProbDist(vec![1.0 / len as f64; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Index of the most probable state; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Appends zero mass for newly created states, then renormalizes.
    pub fn extend_to(&mut self, len: usize) {
        if len <= self.0.len() {
            return;
        }
        self.0.resize(len, 0.0);
        let total: f64 = self.0.iter().sum();
        for p in &mut self.0 {
            *p /= total;
        }
    }
}

impl std::ops::Index<usize> for ProbDist {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// Coefficients of the evolving model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfsmConfig {
    /// Number of discrete actions, one transition matrix each.
    pub actions: usize,
    /// Clustering learning coefficient. Scales the step of the winning center.
    pub rho: f64,
    /// Clustering novelty threshold: a sample whose best kernel similarity
    /// falls below this value founds a new state.
    pub epsilon: f64,
    /// Spread assigned to a freshly created state, in normalized units.
    pub initial_variance: f64,
    /// Lower bound for any state's spread.
    pub variance_floor: f64,
    /// Forgetting factor of the recursive transition identification.
    pub learning_rate: f64,
    /// Initial accumulator mass for every transition entry.
    pub init_mass: f64,
}

impl Default for EfsmConfig {
    fn default() -> Self {
        EfsmConfig {
            actions: 20,
            rho: 0.7,
            epsilon: 0.3,
            initial_variance: 0.05,
            variance_floor: 0.01,
            learning_rate: 0.1,
            init_mass: 1e-6,
        }
    }
}

impl EfsmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("efsm: {msg}")));
        if self.actions == 0 {
            return bad("actions must be positive");
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho must lie in (0, 1]");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if !(self.variance_floor > 0.0 && self.initial_variance >= self.variance_floor) {
            return bad("variances must be positive and initial_variance >= variance_floor");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.init_mass > 0.0 && self.init_mass.is_finite()) {
            return bad("init_mass must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_scales_and_clamps() {
        assert_eq!(normalize_observation([16.0, 100.0, 32.0]), [0.5, 0.5, 1.0]);
        assert_eq!(normalize_observation([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
        assert_eq!(normalize_observation([32.0, 250.0, 16.0]), [1.0, 1.0, 0.5]);
        assert_eq!(normalize_observation([-3.0, -5.0, 40.0]), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        let d = ProbDist::from_weights(vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        assert_eq!(d.argmax(), 0);
        let d = ProbDist::from_weights(vec![0.1, 0.45, 0.45]).unwrap();
        assert_eq!(d.argmax(), 1);
    }

    #[test]
    fn extension_appends_zero_mass() {
        let mut d = ProbDist::from_weights(vec![0.3, 0.7]).unwrap();
        d.extend_to(3);
        assert_eq!(d.as_slice(), &[0.3, 0.7, 0.0]);
    }

    #[test]
    fn rejects_degenerate_weights() {
        assert!(ProbDist::from_weights(vec![]).is_none());
        assert!(ProbDist::from_weights(vec![0.0, 0.0]).is_none());
        assert!(ProbDist::from_weights(vec![1.0, -0.5]).is_none());
        assert!(ProbDist::from_weights(vec![f64::NAN]).is_none());
    }

    #[test]
    fn default_config_is_valid() {
        EfsmConfig::default().validate().unwrap();
        let cfg = EfsmConfig {
            epsilon: 1.5,
            ..EfsmConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
