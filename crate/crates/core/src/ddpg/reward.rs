use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub v_max: f64,
    pub accel_max: f64,
    /// Dimensionless multiplier on the safe distance.
    pub headway_const: f64,
    /// m
    pub d_safe: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            v_max: 32.0,
            accel_max: 2.0,
            headway_const: 2.0,
            d_safe: 10.0,
        }
    }
}

impl RewardConfig {
    pub fn desired_gap(&self) -> f64 {
        self.headway_const * self.d_safe
    }
}

/// The three shifted-exponential reward terms, each in `(-1, 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerms {
    pub velocity: f64,
    pub distance: f64,
    pub accel: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.velocity + self.distance + self.accel
    }
}

/// Penalizes speed mismatch, deviation from the desired gap and jerky
/// acceleration changes.
pub fn reward(cfg: &RewardConfig, ego_speed: f64, lead_speed: f64, headway: f64, delta_accel: f64) -> RewardTerms {
    let dv = ego_speed - lead_speed;
    let gap = cfg.desired_gap();
    RewardTerms {
        velocity: (-(dv * dv) / cfg.v_max).exp() - 1.0,
        distance: (-(headway - gap).powi(2) / (2.0 * gap)).exp() - 1.0,
        accel: (-(delta_accel * delta_accel) / (2.0 * cfg.accel_max)).exp() - 1.0,
    }
}
