use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ddpg::DdpgConfig;
use crate::efsm::EfsmConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::reviser::ReviserConfig;

/// Which action goes into the replay buffer when the reviser intervenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferAction {
    /// The action actually applied to the vehicle.
    #[default]
    Applied,
    /// The controller's own output, before revision.
    Commanded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub runs: usize,
    pub episodes: u64,
    pub framework: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Write a per-step CSV for every episode.
    pub trace: bool,
    /// Controller checkpoint period in episodes; 0 keeps only the final one.
    pub checkpoint_every: u64,
    pub moving_average_window: usize,
    pub buffer_action: BufferAction,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            runs: 3,
            episodes: 300,
            framework: true,
            seed: 0,
            out_dir: PathBuf::from("results"),
            trace: false,
            checkpoint_every: 0,
            moving_average_window: 20,
            buffer_action: BufferAction::Applied,
        }
    }
}

/// Everything a battery needs, one section per module.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSettings,
    pub efsm: EfsmConfig,
    pub reviser: ReviserConfig,
    pub ddpg: DdpgConfig,
    pub env: EnvConfig,
}

impl ExperimentConfig {
    /// 10 runs of 1500 episodes.
    pub fn full() -> Self {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_full_preset();
        cfg
    }

    pub fn apply_full_preset(&mut self) {
        self.experiment.runs = 10;
        self.experiment.episodes = 1500;
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.runs == 0 || self.experiment.episodes == 0 {
            return Err(Error::InvalidConfig("experiment: runs and episodes must be at least 1".into()));
        }
        if self.experiment.moving_average_window == 0 {
            return Err(Error::InvalidConfig("experiment: moving_average_window must be positive".into()));
        }
        self.efsm.validate()?;
        self.reviser.validate()?;
        self.ddpg.validate()?;
        self.env.validate()?;
        let bins = self.reviser.grid()?.bins();
        if bins != self.efsm.actions {
            return Err(Error::InvalidConfig(format!(
                "efsm.actions is {} but the reviser grid has {bins} bins",
                self.efsm.actions
            )));
        }
        if self.ddpg.accel_max != self.env.accel_max
            || self.reviser.a_max != self.env.accel_max
            || self.reviser.a_min != -self.env.accel_max
        {
            return Err(Error::InvalidConfig(
                "ddpg.accel_max, reviser bounds and env.accel_max must describe the same range".into(),
            ));
        }
        Ok(())
    }
}
