use serde::{Deserialize, Serialize};

use super::{EfsmConfig, Flag, ProbDist};
use crate::error::{Error, Result};

/// One discovered state: a cluster center in normalized observation space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub center: Vec<f64>,
    pub variance: f64,
    pub support_count: u64,
    pub flag: Flag,
}

impl ClusterState {
    fn squared_distance(&self, z: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(z)
            .map(|(c, x)| (x - c) * (x - c))
            .sum()
    }

    /// Log of the Gaussian kernel `exp(-|z - c|^2 / var)`.
    fn log_kernel(&self, z: &[f64]) -> f64 {
        -self.squared_distance(z) / self.variance
    }

    /// Unnormalized similarity of `z` to this state.
    pub fn kernel(&self, z: &[f64]) -> f64 {
        self.log_kernel(z).exp()
    }
}

/// Outcome of presenting one observation to the clustering.
///
/// Indices are 0-based positions in the state list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateUpdate {
    Existing(usize),
    New(usize),
}

impl StateUpdate {
    pub fn index(self) -> usize {
        match self {
            StateUpdate::Existing(i) | StateUpdate::New(i) => i,
        }
    }

    pub fn is_new(self) -> bool {
        matches!(self, StateUpdate::New(_))
    }
}

/// Online clustering of observations into states.
///
/// A sample is assigned to the state whose kernel similarity is largest; when
/// even that similarity is below `epsilon`, the sample founds a new state.
/// The winning center moves toward the sample with step `rho / support` and
/// its spread tracks the running mean of squared distances, never dropping
/// below `variance_floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    states: Vec<ClusterState>,
    rho: f64,
    epsilon: f64,
    initial_variance: f64,
    variance_floor: f64,
}

impl ClusterSet {
    pub fn new(config: &EfsmConfig) -> Self {
        ClusterSet {
            states: Vec::new(),
            rho: config.rho,
            epsilon: config.epsilon,
            initial_variance: config.initial_variance,
            variance_floor: config.variance_floor,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ClusterState] {
        &self.states
    }

    pub fn flags(&self) -> Vec<Flag> {
        self.states.iter().map(|s| s.flag).collect()
    }

    pub fn has_flagged(&self) -> bool {
        self.states.iter().any(|s| s.flag.is_unfavorable())
    }

    /// Inserts a state verbatim. Used to build models by hand.
    pub fn push_state(&mut self, state: ClusterState) -> usize {
        assert!(state.variance > 0.0, "state variance must be positive");
        self.states.push(state);
        self.states.len() - 1
    }

    pub fn update(&mut self, z: &[f64]) -> StateUpdate {
        let winner = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.kernel(z)))
            .fold(None, |best: Option<(usize, f64)>, (i, k)| match best {
                Some((_, bk)) if bk >= k => best,
                _ => Some((i, k)),
            });

        match winner {
            Some((i, similarity)) if similarity >= self.epsilon => {
                let state = &mut self.states[i];
                let d2 = state.squared_distance(z);
                state.support_count += 1;
                let n = state.support_count as f64;
                let step = self.rho / n;
                for (c, x) in state.center.iter_mut().zip(z) {
                    *c += step * (x - *c);
                }
                state.variance = (state.variance + (d2 - state.variance) / n).max(self.variance_floor);
                StateUpdate::Existing(i)
            }
            _ => {
                self.states.push(ClusterState {
                    center: z.to_vec(),
                    variance: self.initial_variance,
                    support_count: 1,
                    flag: Flag::None,
                });
                StateUpdate::New(self.states.len() - 1)
            }
        }
    }

    /// Normalized kernel similarities of `z` to every state.
    pub fn probabilities(&self, z: &[f64]) -> Result<ProbDist> {
        if self.states.is_empty() {
            return Err(Error::EmptyModel);
        }
        // log-sum-exp: far samples would otherwise underflow every kernel.
        let logs: Vec<f64> = self.states.iter().map(|s| s.log_kernel(z)).collect();
        let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights = logs.iter().map(|l| (l - peak).exp()).collect();
        Ok(ProbDist::from_weights(weights).expect("peak term is exactly one"))
    }

    /// Flags the most probable state. A flag, once set, is never changed.
    pub fn flag_current(&mut self, dist: &ProbDist, flag: Flag) -> usize {
        assert_eq!(dist.len(), self.states.len(), "distribution/state count mismatch");
        let i = dist.argmax();
        if self.states[i].flag == Flag::None {
            self.states[i].flag = flag;
        }
        i
    }
}
