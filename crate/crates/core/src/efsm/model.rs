use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActionBin, ClusterSet, ClusterState, EfsmConfig, Flag, ProbDist, StateUpdate, TransitionModel};
use crate::error::{Error, Result};

/// States, flags and per-action transition matrices, evolved together.
///
/// Single-writer: one instance belongs to one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolvingModel {
    config: EfsmConfig,
    clusters: ClusterSet,
    transitions: TransitionModel,
}

impl EvolvingModel {
    /// An empty model: no states, `config.actions` empty matrices.
    pub fn new(config: EfsmConfig) -> Result<Self> {
        config.validate()?;
        Ok(EvolvingModel {
            clusters: ClusterSet::new(&config),
            transitions: TransitionModel::new(config.actions, config.learning_rate, config.init_mass),
            config,
        })
    }

    /// Assembles a model from hand-built parts.
    pub fn from_parts(config: EfsmConfig, states: Vec<ClusterState>, transitions: TransitionModel) -> Result<Self> {
        config.validate()?;
        if transitions.states() != states.len() || transitions.action_count() != config.actions {
            return Err(Error::InvalidConfig(
                "transition model does not match the state list or action count".into(),
            ));
        }
        let mut clusters = ClusterSet::new(&config);
        for s in states {
            clusters.push_state(s);
        }
        Ok(EvolvingModel {
            config,
            clusters,
            transitions,
        })
    }

    pub fn config(&self) -> &EfsmConfig {
        &self.config
    }

    pub fn state_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn action_count(&self) -> usize {
        self.transitions.action_count()
    }

    pub fn states(&self) -> &[ClusterState] {
        self.clusters.states()
    }

    pub fn flags(&self) -> Vec<Flag> {
        self.clusters.flags()
    }

    pub fn has_flagged(&self) -> bool {
        self.clusters.has_flagged()
    }

    pub fn transitions(&self) -> &TransitionModel {
        &self.transitions
    }

    /// Presents a normalized observation to the clustering. A new state
    /// expands every transition matrix by one row and column.
    pub fn observe(&mut self, z: &[f64]) -> StateUpdate {
        let update = self.clusters.update(z);
        if update.is_new() {
            self.transitions.expand();
        }
        debug_assert_eq!(self.clusters.len(), self.transitions.states());
        update
    }

    pub fn state_probabilities(&self, z: &[f64]) -> Result<ProbDist> {
        self.clusters.probabilities(z)
    }

    pub fn identify_transition(&mut self, previous: &ProbDist, current: &ProbDist, action: ActionBin) -> Result<()> {
        self.transitions.identify(previous, current, action)
    }

    pub fn predict_next(&self, dist: &ProbDist, action: ActionBin) -> Result<ProbDist> {
        self.transitions.predict_next(dist, action)
    }

    pub fn predict_k(&self, dist: &ProbDist, action: ActionBin, horizon: usize) -> Result<ProbDist> {
        self.transitions.predict_k(dist, action, horizon)
    }

    /// Flags the most probable state of `dist`; returns its index.
    pub fn flag_current_state(&mut self, dist: &ProbDist, flag: Flag) -> Result<usize> {
        if self.clusters.is_empty() {
            return Err(Error::EmptyModel);
        }
        Ok(self.clusters.flag_current(dist, flag))
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        let states = self
            .clusters
            .states()
            .iter()
            .enumerate()
            .map(|(index, s)| StateSnapshot {
                index,
                center: s.center.clone(),
                variance: s.variance,
                support_count: s.support_count,
                flag: s.flag,
            })
            .collect();
        let transitions = (1..=self.transitions.action_count())
            .map(|r| {
                let bin = ActionBin::new(r);
                let (joint, source) = self.transitions.accumulators(bin).expect("bin in range");
                TransitionSnapshot {
                    action: r,
                    joint: joint.to_vec(),
                    source: source.to_vec(),
                    tpm: self.transitions.tpm(bin).expect("bin in range").to_vec(),
                }
            })
            .collect();
        ModelSnapshot {
            config: self.config.clone(),
            state_count: self.clusters.len(),
            states,
            transitions,
        }
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.snapshot())?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// JSON layout of a saved model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub config: EfsmConfig,
    pub state_count: usize,
    pub states: Vec<StateSnapshot>,
    pub transitions: Vec<TransitionSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub index: usize,
    pub center: Vec<f64>,
    pub variance: f64,
    pub support_count: u64,
    pub flag: Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSnapshot {
    /// 1-based action bin.
    pub action: usize,
    pub joint: Vec<Vec<f64>>,
    pub source: Vec<f64>,
    pub tpm: Vec<Vec<f64>>,
}

impl ModelSnapshot {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observe_keeps_dimensions_in_step() {
        let mut m = EvolvingModel::new(EfsmConfig::default()).unwrap();
        assert_eq!(m.observe(&[0.0, 0.0, 0.0]), StateUpdate::New(0));
        assert_eq!(m.observe(&[1.0, 1.0, 1.0]), StateUpdate::New(1));
        assert_eq!(m.observe(&[1.0, 1.0, 1.0]), StateUpdate::Existing(1));
        assert_eq!(m.state_count(), 2);
        assert_eq!(m.transitions().states(), 2);
        let tpm = m.transitions().tpm(ActionBin::new(20)).unwrap();
        assert_eq!(tpm.len(), 2);
    }

    #[test]
    fn empty_model_rejects_queries() {
        let mut m = EvolvingModel::new(EfsmConfig::default()).unwrap();
        assert!(matches!(m.state_probabilities(&[0.1; 3]), Err(Error::EmptyModel)));
        let d = ProbDist::uniform(1);
        assert!(matches!(m.flag_current_state(&d, Flag::UnfavorableSafety), Err(Error::EmptyModel)));
    }

    #[test]
    fn snapshot_writes_readable_json() {
        let mut m = EvolvingModel::new(EfsmConfig {
            actions: 3,
            ..EfsmConfig::default()
        })
        .unwrap();
        m.observe(&[0.2, 0.1, 0.2]);
        m.observe(&[0.9, 0.9, 0.9]);
        let d = m.state_probabilities(&[0.9, 0.9, 0.9]).unwrap();
        m.flag_current_state(&d, Flag::UnfavorableSpeed).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("efsm.json");
        m.save_snapshot(&path).unwrap();
        let snap = ModelSnapshot::load(&path).unwrap();
        assert_eq!(snap, m.snapshot());
        assert_eq!(snap.state_count, 2);
        assert_eq!(snap.transitions.len(), 3);
        assert_eq!(snap.states[1].flag, Flag::UnfavorableSpeed);

        let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(raw["states"][1]["flag"], "unfavorable_speed");
        assert_eq!(raw["transitions"][0]["action"], 1);
    }
}
