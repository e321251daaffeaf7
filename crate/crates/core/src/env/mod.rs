//! Single-lane car following with two point-mass vehicles.

mod profile;

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use profile::{LeadProfile, SyntheticProfileConfig};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    /// m
    pub position: f64,
    /// m/s
    pub velocity: f64,
    /// m/s^2
    pub acceleration: f64,
}

impl VehicleState {
    /// Position advances with the current speed, then the speed with the
    /// clamped acceleration.
    pub fn advance(&mut self, accel: f64, dt: f64, speed_max: f64, accel_max: f64) {
        self.acceleration = accel.clamp(-accel_max, accel_max);
        self.position += self.velocity * dt;
        self.velocity = (self.velocity + self.acceleration * dt).clamp(0.0, speed_max);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxSteps,
    LargeDistance,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProfileSource {
    Synthetic,
    /// Windows of `max_steps` steps are cut at random offsets from the file.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// s
    pub dt: f64,
    pub max_steps: usize,
    /// Episodes end once the headway exceeds this, m.
    pub headway_limit: f64,
    /// Initial headway range, m.
    pub init_headway_min: f64,
    pub init_headway_max: f64,
    /// Upper bound of the initial speed draw for both vehicles, m/s.
    pub init_speed_max: f64,
    pub speed_max: f64,
    pub accel_max: f64,
    pub profile: ProfileSource,
    pub synthetic: SyntheticProfileConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            dt: 0.25,
            max_steps: 800,
            headway_limit: 200.0,
            init_headway_min: 10.0,
            init_headway_max: 100.0,
            init_speed_max: 25.0,
            speed_max: 32.0,
            accel_max: 2.0,
            profile: ProfileSource::Synthetic,
            synthetic: SyntheticProfileConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.dt,
            self.headway_limit,
            self.init_headway_min,
            self.init_headway_max,
            self.init_speed_max,
            self.speed_max,
            self.accel_max,
        ];
        if self.max_steps == 0 || positive.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidConfig("env: all quantities must be positive".into()));
        }
        if self.init_headway_min >= self.init_headway_max || self.init_headway_max > self.headway_limit {
            return Err(Error::InvalidConfig("env: bad initial headway range".into()));
        }
        Ok(())
    }
}

/// Integrates both vehicles one step and returns the new headway.
pub fn step_vehicles(
    ego: &mut VehicleState,
    lead: &mut VehicleState,
    ego_accel: f64,
    lead_accel: f64,
    cfg: &EnvConfig,
) -> f64 {
    ego.advance(ego_accel, cfg.dt, cfg.speed_max, cfg.accel_max);
    lead.advance(lead_accel, cfg.dt, cfg.speed_max, cfg.accel_max);
    lead.position - ego.position
}

/// Failure checks first, so a failure on the last step is reported as such.
pub fn termination(headway: f64, step: usize, cfg: &EnvConfig) -> Option<Termination> {
    if headway <= 0.0 {
        Some(Termination::Collision)
    } else if headway > cfg.headway_limit {
        Some(Termination::LargeDistance)
    } else if step >= cfg.max_steps {
        Some(Termination::MaxSteps)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub ego: VehicleState,
    pub lead: VehicleState,
    pub headway: f64,
    /// Steps taken in this episode, including this one.
    pub step: usize,
    pub termination: Option<Termination>,
}

/// One car-following episode at a time.
#[derive(Debug, Clone)]
pub struct CarFollowing {
    config: EnvConfig,
    library: Option<Arc<LeadProfile>>,
    ego: VehicleState,
    lead: VehicleState,
    profile: LeadProfile,
    step: usize,
    done: bool,
}

impl CarFollowing {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let library = match &config.profile {
            ProfileSource::Synthetic => None,
            ProfileSource::Csv { path } => Some(Arc::new(LeadProfile::from_csv(
                path,
                config.dt,
                config.speed_max,
                config.accel_max,
            )?)),
        };
        Self::with_library(config, library)
    }

    /// Shares an already loaded recording between environments.
    pub fn with_library(config: EnvConfig, library: Option<Arc<LeadProfile>>) -> Result<Self> {
        config.validate()?;
        if let Some(lib) = &library {
            if lib.steps() < config.max_steps {
                return Err(Error::InvalidProfile(format!(
                    "recording has {} steps, episodes need {}",
                    lib.steps(),
                    config.max_steps
                )));
            }
        }
        Ok(CarFollowing {
            config,
            library,
            ego: VehicleState::default(),
            lead: VehicleState::default(),
            profile: LeadProfile {
                dt: 0.0,
                velocities: Vec::new(),
            },
            step: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn ego(&self) -> &VehicleState {
        &self.ego
    }

    pub fn lead(&self) -> &VehicleState {
        &self.lead
    }

    pub fn headway(&self) -> f64 {
        self.lead.position - self.ego.position
    }

    pub fn profile(&self) -> &LeadProfile {
        &self.profile
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Random speeds in `[0, init_speed_max]`, random headway in
    /// `[init_headway_min, init_headway_max)`, and a fresh lead profile.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let c = &self.config;
        let ego_speed = rng.gen_range(0.0..=c.init_speed_max);
        let lead_speed = rng.gen_range(0.0..=c.init_speed_max);
        let headway = rng.gen_range(c.init_headway_min..c.init_headway_max);
        self.profile = match &self.library {
            None => LeadProfile::synthetic(&c.synthetic, lead_speed, c.max_steps, c.dt, c.speed_max, c.accel_max, rng),
            Some(lib) => {
                let start = rng.gen_range(0..=lib.steps() - c.max_steps);
                lib.window(start, c.max_steps).expect("window fits by construction")
            }
        };
        self.ego = VehicleState {
            position: 0.0,
            velocity: ego_speed,
            acceleration: 0.0,
        };
        self.lead = VehicleState {
            position: headway,
            velocity: self.profile.velocities[0],
            acceleration: 0.0,
        };
        self.step = 0;
        self.done = false;
    }

    /// Panics when called on a finished episode.
    pub fn step(&mut self, ego_accel: f64) -> StepOutcome {
        assert!(!self.done, "step called on a finished episode; call reset first");
        let lead_accel = self.profile.acceleration(self.step);
        let headway = step_vehicles(&mut self.ego, &mut self.lead, ego_accel, lead_accel, &self.config);
        self.step += 1;
        let termination = termination(headway, self.step, &self.config);
        self.done = termination.is_some();
        StepOutcome {
            ego: self.ego,
            lead: self.lead,
            headway,
            step: self.step,
            termination,
        }
    }
}
