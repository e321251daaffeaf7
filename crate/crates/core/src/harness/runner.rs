use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{BufferAction, ExperimentConfig};
use super::record::EpisodeRecord;
use crate::ddpg::{reward, ControllerObservation, DdpgAgent, ReplayBuffer, Transition};
use crate::efsm::{normalize_observation, EvolvingModel, Flag, ProbDist};
use crate::env::{CarFollowing, LeadProfile, Termination};
use crate::error::Result;
use crate::reviser::{ActionReviser, Indicator};

/// Independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Env = 0,
    Init = 1,
    Exploration = 2,
    Replay = 3,
    Reviser = 4,
}

/// Stream `module` of run `run` under `seed`.
pub fn stream_rng(seed: u64, run: usize, module: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((run as u64) << 8) | module as u64);
    rng
}

/// One row of a per-episode trace CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub ego_v: f64,
    pub lead_v: f64,
    pub headway: f64,
    pub accel_cmd: f64,
    pub accel_applied: f64,
    pub reward: f64,
    pub intervened: bool,
}

/// One revised action, a line of `interventions.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub run: usize,
    pub episode: u64,
    pub step: usize,
    pub original_action: f64,
    pub revised_action: f64,
    pub indicator: Indicator,
    pub original_bin: usize,
    pub revised_bin: usize,
}

struct Framework {
    model: EvolvingModel,
    reviser: ActionReviser,
}

/// The full module stack of one run: environment, controller, replay
/// buffer and, with the framework enabled, the e-FSM and action-reviser.
pub struct Run {
    config: ExperimentConfig,
    index: usize,
    env: CarFollowing,
    agent: DdpgAgent,
    buffer: ReplayBuffer,
    framework: Option<Framework>,
    env_rng: ChaCha8Rng,
    exploration_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    reviser_rng: ChaCha8Rng,
    episodes_done: u64,
    interventions: Vec<InterventionRecord>,
}

fn efsm_input(ego_speed: f64, headway: f64, lead_speed: f64) -> [f64; 3] {
    normalize_observation([ego_speed, headway, lead_speed])
}

impl Run {
    pub fn new(config: &ExperimentConfig, index: usize) -> Result<Self> {
        let env = CarFollowing::new(config.env.clone())?;
        Self::with_env(config, index, env)
    }

    /// Uses an already loaded lead recording.
    pub fn with_library(config: &ExperimentConfig, index: usize, library: Option<Arc<LeadProfile>>) -> Result<Self> {
        let env = CarFollowing::with_library(config.env.clone(), library)?;
        Self::with_env(config, index, env)
    }

    fn with_env(config: &ExperimentConfig, index: usize, env: CarFollowing) -> Result<Self> {
        config.validate()?;
        let seed = config.experiment.seed;
        let agent = DdpgAgent::new(config.ddpg.clone(), &mut stream_rng(seed, index, Stream::Init))?;
        let framework = if config.experiment.framework {
            Some(Framework {
                model: EvolvingModel::new(config.efsm.clone())?,
                reviser: ActionReviser::new(config.reviser.clone())?,
            })
        } else {
            None
        };
        Ok(Run {
            config: config.clone(),
            index,
            env,
            buffer: ReplayBuffer::new(config.ddpg.buffer_capacity),
            agent,
            framework,
            env_rng: stream_rng(seed, index, Stream::Env),
            exploration_rng: stream_rng(seed, index, Stream::Exploration),
            replay_rng: stream_rng(seed, index, Stream::Replay),
            reviser_rng: stream_rng(seed, index, Stream::Reviser),
            episodes_done: 0,
            interventions: Vec::new(),
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn episodes_done(&self) -> u64 {
        self.episodes_done
    }

    pub fn agent(&self) -> &DdpgAgent {
        &self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// Revisions made during the most recent episode.
    pub fn last_interventions(&self) -> &[InterventionRecord] {
        &self.interventions
    }

    /// `None` when the framework is disabled.
    pub fn model(&self) -> Option<&EvolvingModel> {
        self.framework.as_ref().map(|f| &f.model)
    }

    /// Plays and learns from one episode. Rows are appended to `trace` when
    /// given.
    pub fn run_episode(&mut self, mut trace: Option<&mut Vec<TraceRow>>) -> Result<EpisodeRecord> {
        let episode = self.episodes_done + 1;
        let reward_cfg = self.config.ddpg.reward;
        let penalty = self.config.ddpg.failure_penalty;
        let buffer_action = self.config.experiment.buffer_action;

        self.env.reset(&mut self.env_rng);
        self.agent.reset_noise();
        self.interventions.clear();
        let mut obs = ControllerObservation {
            ego_speed: self.env.ego().velocity,
            headway: self.env.headway(),
            lead_speed: self.env.lead().velocity,
            prev_accel: 0.0,
        };
        let mut dist: Option<ProbDist> = match &mut self.framework {
            Some(f) => {
                let z = efsm_input(obs.ego_speed, obs.headway, obs.lead_speed);
                f.model.observe(&z);
                Some(f.model.state_probabilities(&z)?)
            }
            None => None,
        };

        let mut interventions = 0;
        let mut cumulative_reward = 0.0;
        let mut vel_diff = Welford::default();
        loop {
            let commanded = self.agent.act(&obs, true, &mut self.exploration_rng);
            let (applied, intervened) = match (&self.framework, &dist) {
                (Some(f), Some(d)) => {
                    let rev = f.reviser.revise(d, commanded, &f.model, episode, &mut self.reviser_rng)?;
                    if rev.intervened {
                        self.interventions.push(InterventionRecord {
                            run: self.index,
                            episode,
                            step: self.env.steps_taken() + 1,
                            original_action: commanded,
                            revised_action: rev.action,
                            indicator: rev.indicator,
                            original_bin: rev.original_bin.map_or(0, |b| b.get()),
                            revised_bin: rev.revised_bin.map_or(0, |b| b.get()),
                        });
                    }
                    (rev.action, rev.intervened)
                }
                _ => (commanded, false),
            };
            interventions += u64::from(intervened);

            let out = self.env.step(applied);
            let next_obs = ControllerObservation {
                ego_speed: out.ego.velocity,
                headway: out.headway,
                lead_speed: out.lead.velocity,
                prev_accel: out.ego.acceleration,
            };
            let eta = reward(
                &reward_cfg,
                out.ego.velocity,
                out.lead.velocity,
                out.headway,
                out.ego.acceleration - obs.prev_accel,
            )
            .total();
            let failure = match out.termination {
                Some(Termination::Collision) => Some(Flag::UnfavorableSafety),
                Some(Termination::LargeDistance) => Some(Flag::UnfavorableSpeed),
                _ => None,
            };
            cumulative_reward += eta;
            vel_diff.push((out.ego.velocity - out.lead.velocity).abs());

            let accel_max = self.config.ddpg.accel_max;
            self.buffer.push(Transition {
                obs: obs.normalized(accel_max),
                action: match buffer_action {
                    BufferAction::Applied => out.ego.acceleration,
                    BufferAction::Commanded => commanded,
                },
                next_obs: next_obs.normalized(accel_max),
                reward: eta + if failure.is_some() { penalty } else { 0.0 },
                done: failure.is_some(),
            });
            self.agent.train_step(&self.buffer, &mut self.replay_rng);

            if let Some(f) = &mut self.framework {
                let z = efsm_input(out.ego.velocity, out.headway, out.lead.velocity);
                f.model.observe(&z);
                let mut previous = dist.take().expect("framework keeps a distribution");
                previous.extend_to(f.model.state_count());
                let current = f.model.state_probabilities(&z)?;
                let bin = f.reviser.grid().encode(out.ego.acceleration);
                f.model.identify_transition(&previous, &current, bin)?;
                if let Some(flag) = failure {
                    f.model.flag_current_state(&current, flag)?;
                }
                dist = Some(current);
            }

            if let Some(rows) = trace.as_deref_mut() {
                rows.push(TraceRow {
                    step: out.step,
                    ego_v: out.ego.velocity,
                    lead_v: out.lead.velocity,
                    headway: out.headway,
                    accel_cmd: commanded,
                    accel_applied: out.ego.acceleration,
                    reward: eta,
                    intervened,
                });
            }

            if let Some(t) = out.termination {
                self.episodes_done = episode;
                let steps = if t == Termination::MaxSteps { out.step } else { out.step - 1 };
                return Ok(EpisodeRecord {
                    run: self.index,
                    episode,
                    steps,
                    outcome: t.into(),
                    interventions,
                    vel_diff_mean: vel_diff.mean,
                    vel_diff_var: vel_diff.variance(),
                    cumulative_reward,
                });
            }
            obs = next_obs;
        }
    }
}

/// Running mean and population variance.
#[derive(Debug, Default, Clone, Copy)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.m2 / self.n as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn small(framework: bool) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.framework = framework;
        cfg.env.max_steps = 60;
        cfg.ddpg.batch_size = 16;
        cfg.reviser.activation_episodes = 2;
        cfg
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 4.0, 7.0, 2.5];
        let mut w = Welford::default();
        xs.iter().for_each(|x| w.push(*x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((w.mean - mean).abs() < 1e-12 && (w.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let mut a = stream_rng(7, 0, Stream::Env);
        let mut b = stream_rng(7, 0, Stream::Env);
        let mut c = stream_rng(7, 1, Stream::Env);
        let mut d = stream_rng(7, 0, Stream::Replay);
        let x = a.next_u64();
        assert_eq!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
        assert_ne!(x, d.next_u64());
    }

    #[test]
    fn records_are_consistent() {
        for framework in [false, true] {
            let mut run = Run::new(&small(framework), 3).unwrap();
            for e in 1..=6 {
                let mut rows = Vec::new();
                let r = run.run_episode(Some(&mut rows)).unwrap();
                assert_eq!((r.run, r.episode), (3, e));
                assert!(r.steps <= 60);
                assert_eq!(r.outcome == super::super::Outcome::Success, r.steps == 60);
                assert_eq!(rows.len(), if r.steps == 60 { 60 } else { r.steps + 1 });
                assert_eq!(r.interventions, rows.iter().filter(|t| t.intervened).count() as u64);
                if !framework {
                    assert_eq!(r.interventions, 0);
                }
            }
            assert_eq!(run.model().is_some(), framework);
        }
    }

    #[test]
    fn model_grows_with_the_framework() {
        let mut run = Run::new(&small(true), 0).unwrap();
        run.run_episode(None).unwrap();
        let model = run.model().unwrap();
        assert!(model.state_count() >= 1);
        for bin in 1..=model.action_count() {
            let tpm = model.transitions().tpm(crate::efsm::ActionBin::new(bin)).unwrap();
            for row in tpm {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
