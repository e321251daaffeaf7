//! Deep deterministic policy gradient controller.
//!
//! Actor and critic are small dense networks trained with hand-written
//! backpropagation and Adam. Exploration uses an Ornstein-Uhlenbeck process;
//! target networks track the online ones by soft updates.

mod adam;
mod network;
mod noise;
mod replay;
mod reward;

use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::efsm::{HEADWAY_RANGE, SPEED_RANGE};
use crate::error::{Error, Result};

pub use adam::Adam;
pub use network::{Activation, Dense, ForwardCache, Gradients, Mlp};
pub use noise::{ou_step, OuNoise};
pub use replay::{ReplayBuffer, Transition};
pub use reward::{reward, RewardConfig, RewardTerms};

/// Raw controller inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerObservation {
    /// m/s
    pub ego_speed: f64,
    /// m
    pub headway: f64,
    /// m/s
    pub lead_speed: f64,
    /// m/s^2
    pub prev_accel: f64,
}

impl ControllerObservation {
    /// Network input: speeds over 32, headway over 200, acceleration over
    /// `accel_max`.
    pub fn normalized(&self, accel_max: f64) -> [f64; 4] {
        [
            self.ego_speed / SPEED_RANGE,
            self.headway / HEADWAY_RANGE,
            self.lead_speed / SPEED_RANGE,
            self.prev_accel / accel_max,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    pub soft_update_rate: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Largest magnitude of the commanded acceleration, m/s^2.
    pub accel_max: f64,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub ou_dt: f64,
    /// Added to the reward of a transition that ends the episode by
    /// collision or excessive headway.
    pub failure_penalty: f64,
    pub reward: RewardConfig,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        let discount = 0.95;
        DdpgConfig {
            hidden: vec![64, 64],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            discount,
            soft_update_rate: 0.001,
            buffer_capacity: 100_000,
            batch_size: 64,
            accel_max: 2.0,
            ou_theta: 0.15,
            ou_sigma: 0.4,
            ou_dt: 1.0,
            failure_penalty: -3.0 / (1.0 - discount),
            reward: RewardConfig::default(),
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("ddpg: {msg}")));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.soft_update_rate) {
            return bad("soft_update_rate must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("need 0 < batch_size <= buffer_capacity");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.accel_max > 0.0) {
            return bad("learning rates and accel_max must be positive");
        }
        Ok(())
    }

    fn actor_sizes(&self) -> Vec<usize> {
        let mut s = vec![4];
        s.extend(&self.hidden);
        s.push(1);
        s
    }

    fn critic_sizes(&self) -> Vec<usize> {
        let mut s = vec![5];
        s.extend(&self.hidden);
        s.push(1);
        s
    }
}

/// Losses reported by one training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    /// Mean squared temporal-difference error before the critic update.
    pub critic_loss: f64,
    /// Mean critic value of the actor's actions before the actor update.
    pub actor_objective: f64,
}

/// A sampled batch laid out as matrices.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Array2<f64>,
    pub done: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition]) -> Self {
        let b = ts.len();
        Batch {
            obs: Array2::from_shape_fn((b, 4), |(i, j)| ts[i].obs[j]),
            actions: Array2::from_shape_fn((b, 1), |(i, _)| ts[i].action),
            rewards: ts.iter().map(|t| t.reward).collect(),
            next_obs: Array2::from_shape_fn((b, 4), |(i, j)| ts[i].next_obs[j]),
            done: ts.iter().map(|t| t.done).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgAgent {
    config: DdpgConfig,
    actor: Mlp,
    critic: Mlp,
    target_actor: Mlp,
    target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    noise: OuNoise,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(config: DdpgConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let actor = Mlp::new(
            &config.actor_sizes(),
            Activation::Tanh,
            Activation::Tanh,
            config.accel_max,
            3e-3,
            rng,
        );
        let critic = Mlp::new(&config.critic_sizes(), Activation::Tanh, Activation::Linear, 1.0, 3e-3, rng);
        Ok(Self::assemble(config, actor, critic))
    }

    /// Builds an agent around given online networks; targets start as copies.
    pub fn from_networks(config: DdpgConfig, actor: Mlp, critic: Mlp) -> Result<Self> {
        config.validate()?;
        if actor.input_size() != 4 || critic.input_size() != 5 {
            return Err(Error::InvalidConfig("actor takes 4 inputs, critic takes 5".into()));
        }
        Ok(Self::assemble(config, actor, critic))
    }

    fn assemble(config: DdpgConfig, actor: Mlp, critic: Mlp) -> Self {
        DdpgAgent {
            actor_opt: Adam::new(&actor, config.actor_lr),
            critic_opt: Adam::new(&critic, config.critic_lr),
            noise: OuNoise::new(config.ou_theta, config.ou_sigma, config.ou_dt),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            config,
        }
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.config
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn target_actor(&self) -> &Mlp {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &Mlp {
        &self.target_critic
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critic_mut(&mut self) -> &mut Mlp {
        &mut self.critic
    }

    /// Restarts the exploration process at its mean.
    pub fn reset_noise(&mut self) {
        self.noise.reset();
    }

    /// Acceleration for `obs`, optionally perturbed by the exploration
    /// process and clamped to `[-accel_max, accel_max]`.
    pub fn act<R: Rng + ?Sized>(&mut self, obs: &ControllerObservation, explore: bool, rng: &mut R) -> f64 {
        let a = self.policy(obs);
        let a = if explore { a + self.noise.step(rng) } else { a };
        a.clamp(-self.config.accel_max, self.config.accel_max)
    }

    /// Noise-free actor output.
    pub fn policy(&self, obs: &ControllerObservation) -> f64 {
        let x = Array2::from_shape_vec((1, 4), obs.normalized(self.config.accel_max).to_vec()).expect("1x4");
        self.actor.forward(&x)[[0, 0]]
    }

    fn critic_input(&self, obs: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
        ndarray::concatenate(Axis(1), &[obs.view(), (actions / self.config.accel_max).view()]).expect("same rows")
    }

    /// Bootstrapped targets `r + discount * Q'(s', mu'(s'))`, without the
    /// bootstrap term on failure transitions.
    pub fn targets(&self, batch: &Batch) -> Vec<f64> {
        let next_actions = self.target_actor.forward(&batch.next_obs);
        let q_next = self.target_critic.forward(&self.critic_input(&batch.next_obs, &next_actions));
        (0..batch.len())
            .map(|i| {
                let bootstrap = if batch.done[i] { 0.0 } else { q_next[[i, 0]] };
                batch.rewards[i] + self.config.discount * bootstrap
            })
            .collect()
    }

    /// Mean squared error of the online critic against fixed targets.
    pub fn critic_loss(&self, batch: &Batch, targets: &[f64]) -> f64 {
        let q = self.critic.forward(&self.critic_input(&batch.obs, &batch.actions));
        q.iter().zip(targets).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / batch.len() as f64
    }

    /// Critic loss and its gradient with respect to the critic parameters.
    pub fn critic_gradients(&self, batch: &Batch, targets: &[f64]) -> (f64, Gradients) {
        let n = batch.len() as f64;
        let (q, cache) = self.critic.forward_cached(&self.critic_input(&batch.obs, &batch.actions));
        let mut loss = 0.0;
        let d_q = Array2::from_shape_fn(q.raw_dim(), |(i, _)| {
            let err = q[[i, 0]] - targets[i];
            loss += err * err;
            2.0 * err / n
        });
        let (grads, _) = self.critic.backward(&cache, &d_q);
        (loss / n, grads)
    }

    /// Mean of `Q(s, mu(s))` over the batch observations.
    pub fn actor_objective(&self, obs: &Array2<f64>) -> f64 {
        let a = self.actor.forward(obs);
        let q = self.critic.forward(&self.critic_input(obs, &a));
        q.mean().expect("non-empty batch")
    }

    /// Actor objective and the gradient of the objective with respect to the
    /// actor parameters, chained through the critic's action input.
    pub fn actor_gradients(&self, obs: &Array2<f64>) -> (f64, Gradients) {
        let n = obs.nrows() as f64;
        let (a, actor_cache) = self.actor.forward_cached(obs);
        let (q, critic_cache) = self.critic.forward_cached(&self.critic_input(obs, &a));
        let d_q = Array2::from_elem(q.raw_dim(), 1.0 / n);
        let (_, d_input) = self.critic.backward(&critic_cache, &d_q);
        let d_action = d_input.slice(ndarray::s![.., 4..5]).to_owned() / self.config.accel_max;
        let (grads, _) = self.actor.backward(&actor_cache, &d_action);
        (q.mean().expect("non-empty batch"), grads)
    }

    /// Critic regression toward the bootstrapped targets, one ascent step for
    /// the actor, then soft updates of both target networks.
    pub fn train_on_batch(&mut self, batch: &Batch) -> TrainStats {
        let targets = self.targets(batch);
        let (critic_loss, critic_grads) = self.critic_gradients(batch, &targets);
        self.critic_opt.step(&mut self.critic, &critic_grads);

        let (actor_objective, mut actor_grads) = self.actor_gradients(&batch.obs);
        // Adam descends; negate to ascend the critic's value.
        for (w, b) in &mut actor_grads.layers {
            w.mapv_inplace(|g| -g);
            b.mapv_inplace(|g| -g);
        }
        self.actor_opt.step(&mut self.actor, &actor_grads);

        let tau = self.config.soft_update_rate;
        self.target_actor.soft_update(&self.actor, tau);
        self.target_critic.soft_update(&self.critic, tau);
        TrainStats {
            critic_loss,
            actor_objective,
        }
    }

    /// Samples one batch and trains on it. `None` while the buffer holds
    /// fewer than `batch_size` transitions.
    pub fn train_step<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Option<TrainStats> {
        let sample = buffer.sample(self.config.batch_size, rng)?;
        Some(self.train_on_batch(&Batch::from_transitions(&sample)))
    }

    pub fn checkpoint(&self, run: usize, episode: u64) -> Checkpoint {
        Checkpoint {
            run,
            episode,
            config: self.config.clone(),
            actor: self.actor.clone(),
            critic: self.critic.clone(),
            target_actor: self.target_actor.clone(),
            target_critic: self.target_critic.clone(),
            actor_opt: self.actor_opt.clone(),
            critic_opt: self.critic_opt.clone(),
            noise: self.noise,
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.config.validate()?;
        Ok(DdpgAgent {
            config: ckpt.config,
            actor: ckpt.actor,
            critic: ckpt.critic,
            target_actor: ckpt.target_actor,
            target_critic: ckpt.target_critic,
            actor_opt: ckpt.actor_opt,
            critic_opt: ckpt.critic_opt,
            noise: ckpt.noise,
        })
    }
}

/// Every network parameter and optimizer moment of an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub run: usize,
    pub episode: u64,
    pub config: DdpgConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub noise: OuNoise,
}

impl Checkpoint {
    /// `run{run:03}_ep{episode:05}.json`
    pub fn file_name(run: usize, episode: u64) -> String {
        format!("run{run:03}_ep{episode:05}.json")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> DdpgConfig {
        DdpgConfig {
            hidden: vec![8, 8],
            batch_size: 4,
            buffer_capacity: 32,
            ..DdpgConfig::default()
        }
    }

    fn obs(seed: u64) -> ControllerObservation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ControllerObservation {
            ego_speed: rng.gen_range(0.0..32.0),
            headway: rng.gen_range(0.0..200.0),
            lead_speed: rng.gen_range(0.0..32.0),
            prev_accel: rng.gen_range(-2.0..2.0),
        }
    }

    fn filled_buffer(n: usize, rng: &mut ChaCha8Rng) -> ReplayBuffer {
        let mut buffer = ReplayBuffer::new(64);
        for i in 0..n {
            buffer.push(Transition {
                obs: obs(i as u64).normalized(2.0),
                action: rng.gen_range(-2.0..2.0),
                next_obs: obs(i as u64 + 1000).normalized(2.0),
                reward: rng.gen_range(-3.0..0.0),
                done: i % 7 == 0,
            });
        }
        buffer
    }

    #[test]
    fn greedy_action_is_deterministic_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut agent = DdpgAgent::new(DdpgConfig::default(), &mut rng).unwrap();
        let o = obs(9);
        let a = agent.act(&o, false, &mut rng);
        assert_eq!(a, agent.act(&o, false, &mut rng));
        for i in 0..200 {
            let a = agent.act(&obs(i), true, &mut rng);
            assert!((-2.0..=2.0).contains(&a));
        }
    }

    #[test]
    fn zero_actor_outputs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut agent = DdpgAgent::new(small_config(), &mut rng).unwrap();
        let zeros = vec![0.0; agent.actor().param_count()];
        agent.actor_mut().set_flat_params(&zeros);
        assert_eq!(agent.act(&obs(1), false, &mut rng), 0.0);
    }

    #[test]
    fn exact_fit_has_zero_critic_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let agent = DdpgAgent::new(small_config(), &mut rng).unwrap();
        let buffer = filled_buffer(10, &mut rng);
        let batch = Batch::from_transitions(&buffer.sample(4, &mut rng).unwrap());
        let q = agent.critic().forward(&agent.critic_input(&batch.obs, &batch.actions));
        let targets: Vec<f64> = q.iter().copied().collect();
        assert_eq!(agent.critic_loss(&batch, &targets), 0.0);
        let (loss, grads) = agent.critic_gradients(&batch, &targets);
        assert_eq!(loss, 0.0);
        assert!(grads.flatten().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn insufficient_buffer_skips_training() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut agent = DdpgAgent::new(small_config(), &mut rng).unwrap();
        let buffer = filled_buffer(3, &mut rng);
        let before = agent.clone();
        assert!(agent.train_step(&buffer, &mut rng).is_none());
        assert_eq!(agent, before);
    }

    #[test]
    fn target_networks_move_by_soft_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut agent = DdpgAgent::new(small_config(), &mut rng).unwrap();
        let buffer = filled_buffer(20, &mut rng);
        let before = agent.clone();
        agent.train_step(&buffer, &mut rng).unwrap();
        let rate = agent.config().soft_update_rate;
        let pairs = [
            (before.target_critic(), agent.target_critic(), before.critic(), agent.critic()),
            (before.target_actor(), agent.target_actor(), before.actor(), agent.actor()),
        ];
        for (t0, t1, o0, o1) in pairs {
            let (t0, t1, o0, o1) = (t0.flat_params(), t1.flat_params(), o0.flat_params(), o1.flat_params());
            for i in 0..t0.len() {
                // Targets start equal to the online nets, so the target step
                // is exactly rate * (online change).
                let moved = (t1[i] - t0[i]).abs();
                assert!(moved <= rate * (o1[i] - o0[i]).abs() + 1e-15);
            }
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut agent = DdpgAgent::new(small_config(), &mut rng).unwrap();
        let buffer = filled_buffer(20, &mut rng);
        for _ in 0..3 {
            agent.train_step(&buffer, &mut rng).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(Checkpoint::file_name(2, 17));
        agent.checkpoint(2, 17).save(&path).unwrap();
        let ckpt = Checkpoint::load(&path).unwrap();
        assert_eq!((ckpt.run, ckpt.episode), (2, 17));
        let restored = DdpgAgent::from_checkpoint(ckpt).unwrap();
        assert_eq!(restored, agent);
        assert!(path.ends_with("run002_ep00017.json"));
    }
}
