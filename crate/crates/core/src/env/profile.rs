use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the synthetic lead-vehicle speed generator: a
/// mean-reverting walk toward a piecewise-constant target speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticProfileConfig {
    /// Reversion rate toward the target speed, 1/s.
    pub reversion: f64,
    /// Standard deviation of the per-step acceleration perturbation, m/s^2.
    pub sigma: f64,
    /// Target speeds are drawn uniformly from this range, m/s.
    pub target_min: f64,
    pub target_max: f64,
    /// Holding time of one target, s.
    pub hold_min: f64,
    pub hold_max: f64,
}

impl Default for SyntheticProfileConfig {
    fn default() -> Self {
        SyntheticProfileConfig {
            reversion: 0.2,
            sigma: 0.3,
            target_min: 0.0,
            target_max: 32.0,
            hold_min: 10.0,
            hold_max: 30.0,
        }
    }
}

/// Lead-vehicle speeds sampled every `dt`; `velocities[k]` is the speed at
/// step `k`, so a profile for `n` steps stores `n + 1` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadProfile {
    pub dt: f64,
    pub velocities: Vec<f64>,
}

impl LeadProfile {
    pub fn steps(&self) -> usize {
        self.velocities.len().saturating_sub(1)
    }

    /// Acceleration between consecutive samples.
    pub fn acceleration(&self, step: usize) -> f64 {
        (self.velocities[step + 1] - self.velocities[step]) / self.dt
    }

    pub fn accelerations(&self) -> impl Iterator<Item = f64> + '_ {
        self.velocities.windows(2).map(|w| (w[1] - w[0]) / self.dt)
    }

    /// Copies `steps + 1` samples starting at `start`.
    pub fn window(&self, start: usize, steps: usize) -> Option<LeadProfile> {
        let end = start.checked_add(steps + 1)?;
        (end <= self.velocities.len()).then(|| LeadProfile {
            dt: self.dt,
            velocities: self.velocities[start..end].to_vec(),
        })
    }

    /// Generates `steps` steps starting from speed `v0`.
    pub fn synthetic<R: Rng + ?Sized>(
        cfg: &SyntheticProfileConfig,
        v0: f64,
        steps: usize,
        dt: f64,
        speed_max: f64,
        accel_max: f64,
        rng: &mut R,
    ) -> LeadProfile {
        let mut v = v0.clamp(0.0, speed_max);
        let mut velocities = Vec::with_capacity(steps + 1);
        velocities.push(v);
        let mut target = v;
        let mut hold = 0usize;
        for _ in 0..steps {
            if hold == 0 {
                target = if cfg.target_max > cfg.target_min {
                    rng.gen_range(cfg.target_min..cfg.target_max)
                } else {
                    cfg.target_min
                };
                let seconds = if cfg.hold_max > cfg.hold_min {
                    rng.gen_range(cfg.hold_min..cfg.hold_max)
                } else {
                    cfg.hold_min
                };
                hold = ((seconds / dt).round() as usize).max(1);
            }
            hold -= 1;
            let draw: f64 = rng.sample(StandardNormal);
            let a = (cfg.reversion * (target - v) + cfg.sigma * draw).clamp(-accel_max, accel_max);
            v = (v + a * dt).clamp(0.0, speed_max);
            velocities.push(v);
        }
        LeadProfile { dt, velocities }
    }

    /// Reads a `step,velocity_mps` CSV. Speeds must lie in
    /// `[0, speed_max]` and implied accelerations in
    /// `[-accel_max, accel_max]`.
    pub fn from_csv(path: &Path, dt: f64, speed_max: f64, accel_max: f64) -> Result<LeadProfile> {
        #[derive(Deserialize)]
        struct Row {
            #[allow(dead_code)]
            step: u64,
            velocity_mps: f64,
        }
        let mut reader = csv::Reader::from_path(path)?;
        let mut velocities = Vec::new();
        for row in reader.deserialize() {
            let row: Row = row?;
            velocities.push(row.velocity_mps);
        }
        let profile = LeadProfile { dt, velocities };
        profile.validate(speed_max, accel_max)?;
        Ok(profile)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "velocity_mps"])?;
        for (k, v) in self.velocities.iter().enumerate() {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self, speed_max: f64, accel_max: f64) -> Result<()> {
        if self.velocities.len() < 2 {
            return Err(Error::InvalidProfile("need at least two samples".into()));
        }
        if let Some(k) = self
            .velocities
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > speed_max)
        {
            return Err(Error::InvalidProfile(format!(
                "speed {} at step {k} outside [0, {speed_max}]",
                self.velocities[k]
            )));
        }
        if let Some(k) = self.accelerations().position(|a| a.abs() > accel_max + 1e-9) {
            return Err(Error::InvalidProfile(format!(
                "acceleration {} at step {k} exceeds {accel_max}",
                self.acceleration(k)
            )));
        }
        Ok(())
    }
}
