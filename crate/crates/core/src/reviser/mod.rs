//! Action reviser.
//!
//! Predicts the next-state distribution for the controller's chosen action,
//! checks whether an unfavorable state clears a distribution-dependent
//! threshold, and walks the discrete action grid toward braking (collision
//! expected) or accelerating (large distance expected) until the prediction
//! is clear or the grid edge is reached.

mod grid;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::efsm::{ActionBin, EvolvingModel, Flag, ProbDist};
use crate::error::{Error, Result};

pub use grid::ActionGrid;

/// Outcome of inspecting one predicted distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Collision,
    LargeDistance,
    Clear,
}

impl Indicator {
    /// Numeric code used in logs: 0 collision, 1 large distance, 2 clear.
    pub fn code(self) -> u8 {
        match self {
            Indicator::Collision => 0,
            Indicator::LargeDistance => 1,
            Indicator::Clear => 2,
        }
    }
}

/// Order in which states are tested against the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanOrder {
    /// State-list order; the first qualifying state decides.
    #[default]
    Index,
    /// Most probable state first.
    Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviserConfig {
    pub a_min: f64,
    pub a_max: f64,
    /// Width of one discrete action bin, m/s^2.
    pub delta: f64,
    /// Decay constant of the exploration variance.
    pub decay: f64,
    /// Episodes that pass before the reviser may intervene.
    pub activation_episodes: u64,
    pub scan_order: ScanOrder,
    /// Add Gaussian exploration noise to revised actions.
    pub exploration_noise: bool,
}

impl Default for ReviserConfig {
    fn default() -> Self {
        ReviserConfig {
            a_min: -2.0,
            a_max: 2.0,
            delta: 0.2,
            decay: 0.001,
            activation_episodes: 50,
            scan_order: ScanOrder::Index,
            exploration_noise: true,
        }
    }
}

impl ReviserConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0) {
            return Err(Error::InvalidConfig("reviser: decay must be positive".into()));
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<ActionGrid> {
        ActionGrid::new(self.a_min, self.a_max, self.delta)
    }
}

/// Probability cutoff for one predicted distribution.
///
/// The probabilities are sorted in descending order and the expected rank
/// `E = sum_j j * X(j)` (1-based) is computed; the cutoff is `X(floor(E))`.
/// Flat predictions push the expected rank down the list and lower the cutoff.
pub fn variant_threshold(probs: &[f64]) -> f64 {
    assert!(!probs.is_empty(), "threshold of an empty distribution");
    let mut sorted = probs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let expected_rank: f64 = sorted.iter().enumerate().map(|(j, p)| (j + 1) as f64 * p).sum();
    let rank = (expected_rank.floor() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Classifies a predicted distribution by the flag of the first state whose
/// probability reaches the variant threshold. No qualifying state means
/// clear.
pub fn inspect(pred: &ProbDist, flags: &[Flag], order: ScanOrder) -> Indicator {
    assert_eq!(pred.len(), flags.len(), "prediction/flag length mismatch");
    let threshold = variant_threshold(pred.as_slice());
    let mut indices: Vec<usize> = (0..pred.len()).collect();
    if order == ScanOrder::Probability {
        indices.sort_by(|&a, &b| pred[b].total_cmp(&pred[a]));
    }
    indices
        .into_iter()
        .find(|&i| pred[i] >= threshold)
        .map(|i| match flags[i] {
            Flag::UnfavorableSafety => Indicator::Collision,
            Flag::UnfavorableSpeed => Indicator::LargeDistance,
            Flag::None => Indicator::Clear,
        })
        .unwrap_or(Indicator::Clear)
}

/// Variance of the Gaussian noise added to revised actions:
/// `a_max / max(1, K * episode)`.
pub fn exploration_variance(a_max: f64, decay: f64, episode: u64) -> f64 {
    a_max / (decay * episode as f64).max(1.0)
}

/// Result of one revision call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Revision {
    /// Action to apply.
    pub action: f64,
    pub intervened: bool,
    /// Inspection of the controller's own action.
    pub indicator: Indicator,
    /// Bin the controller's action fell into, when it was inspected.
    pub original_bin: Option<ActionBin>,
    /// Bin chosen by the search, when it ran.
    pub revised_bin: Option<ActionBin>,
}

impl Revision {
    fn pass_through(action: f64, indicator: Indicator, original_bin: Option<ActionBin>) -> Self {
        Revision {
            action,
            intervened: false,
            indicator,
            original_bin,
            revised_bin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionReviser {
    config: ReviserConfig,
    grid: ActionGrid,
}

impl ActionReviser {
    pub fn new(config: ReviserConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        Ok(ActionReviser { config, grid })
    }

    pub fn config(&self) -> &ReviserConfig {
        &self.config
    }

    pub fn grid(&self) -> &ActionGrid {
        &self.grid
    }

    /// Inspects `action` under the model and revises it if an unfavorable
    /// state is expected. `episode` is the 1-based episode counter.
    pub fn revise<R: Rng + ?Sized>(
        &self,
        dist: &ProbDist,
        action: f64,
        model: &EvolvingModel,
        episode: u64,
        rng: &mut R,
    ) -> Result<Revision> {
        let variance = if self.config.exploration_noise {
            exploration_variance(self.config.a_max, self.config.decay, episode)
        } else {
            0.0
        };
        self.revise_with_variance(dist, action, model, episode, variance, rng)
    }

    /// Same as [`ActionReviser::revise`] with an explicit noise variance.
    pub fn revise_with_variance<R: Rng + ?Sized>(
        &self,
        dist: &ProbDist,
        action: f64,
        model: &EvolvingModel,
        episode: u64,
        variance: f64,
        rng: &mut R,
    ) -> Result<Revision> {
        if episode < self.config.activation_episodes || !model.has_flagged() {
            return Ok(Revision::pass_through(action, Indicator::Clear, None));
        }
        assert_eq!(
            model.action_count(),
            self.grid.bins(),
            "model actions must match the action grid"
        );
        let flags = model.flags();
        let check = |bin: ActionBin| -> Result<Indicator> {
            let pred = model.predict_next(dist, bin)?;
            Ok(inspect(&pred, &flags, self.config.scan_order))
        };

        let original = self.grid.encode(action);
        let indicator = check(original)?;
        let mut bin = original.get();
        match indicator {
            Indicator::Clear => return Ok(Revision::pass_through(action, indicator, Some(original))),
            Indicator::Collision => {
                let mut current = indicator;
                while current == Indicator::Collision && bin > 1 {
                    bin -= 1;
                    current = check(ActionBin::new(bin))?;
                }
            }
            Indicator::LargeDistance => {
                let mut current = indicator;
                while current == Indicator::LargeDistance && bin < self.grid.bins() {
                    bin += 1;
                    current = check(ActionBin::new(bin))?;
                }
            }
        }

        let revised_bin = ActionBin::new(bin);
        let mut revised = self.grid.decode(revised_bin);
        if variance > 0.0 {
            let noise = Normal::new(0.0, variance.sqrt()).expect("finite positive deviation");
            revised += noise.sample(rng);
        }
        Ok(Revision {
            action: revised.clamp(self.config.a_min, self.config.a_max),
            intervened: true,
            indicator,
            original_bin: Some(original),
            revised_bin: Some(revised_bin),
        })
    }
}
