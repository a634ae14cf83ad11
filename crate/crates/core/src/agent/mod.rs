//! Deep deterministic policy gradient built on the from-scratch [`Mlp`].
//!
//! Observations are normalized before entering either network:
//! `[ẋ / u_max, (z̈ − 9.8) / 10, p]`; the critic additionally sees the action
//! divided by `u_max`.

mod adam;
mod checkpoint;
mod mlp;
mod noise;
mod replay;

pub use adam::Adam;
pub use checkpoint::{CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use mlp::{ForwardCache, Mlp, OutputActivation};
pub use noise::{NoiseConfig, NoiseState};
pub use replay::ReplayBuffer;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Transition;
use crate::sensors::Observation;
use crate::GRAVITY;

pub const OBS_DIM: usize = 3;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("need {need} transitions to update, have {have}")]
    InsufficientData { have: usize, need: usize },
    #[error("network shape: {0}")]
    Shape(String),
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint format version {found}, expected {expected}")]
    FormatVersionMismatch { found: u64, expected: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    /// Target-network smoothing factor.
    pub tau_soft: f64,
    pub buffer_capacity: usize,
    /// Transitions collected before the first gradient update.
    pub warmup_steps: usize,
    pub hidden: Vec<usize>,
    /// Multiplies rewards before they enter the critic's regression target.
    pub reward_scale: f64,
    pub noise: NoiseConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.99,
            batch_size: 64,
            tau_soft: 1e-3,
            buffer_capacity: 100_000,
            warmup_steps: 1000,
            hidden: vec![64, 64],
            reward_scale: 0.01,
            noise: NoiseConfig::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::InvalidConfig(m));
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be > 0".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.tau_soft > 0.0 && self.tau_soft <= 1.0) {
            return bad(format!("tau_soft must lie in (0, 1], got {}", self.tau_soft));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch_size and buffer_capacity must be > 0".into());
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden layer sizes must be > 0".into());
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale must be > 0".into());
        }
        self.noise.validate().map_err(AgentError::InvalidConfig)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Mean Q(s, μ(s)) over the batch, before the actor step.
    pub actor_objective: f64,
}

/// Bootstrapped regression target `r + γ (1 − done) q_next`.
pub fn td_target(reward: f64, done: bool, gamma: f64, q_next: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q_next
    }
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub(crate) config: AgentConfig,
    pub(crate) u_max: f64,
    pub(crate) actor: Mlp,
    pub(crate) critic: Mlp,
    pub(crate) actor_target: Mlp,
    pub(crate) critic_target: Mlp,
    pub(crate) actor_opt: Adam,
    pub(crate) critic_opt: Adam,
    pub(crate) noise: NoiseState,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) episode: u64,
    buffer: ReplayBuffer,
}

impl DdpgAgent {
    pub fn new(config: AgentConfig, u_max: f64, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        if !(u_max > 0.0 && u_max.is_finite()) {
            return Err(AgentError::InvalidConfig(format!("u_max must be > 0, got {u_max}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_sizes = vec![OBS_DIM];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(1);
        let mut critic_sizes = vec![OBS_DIM + 1];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, OutputActivation::Squash { scale: u_max }, 3e-3, &mut rng);
        let critic = Mlp::new(&critic_sizes, OutputActivation::Identity, 3e-3, &mut rng);
        Ok(Self {
            actor_opt: Adam::new(actor.params().len(), config.actor_lr),
            critic_opt: Adam::new(critic.params().len(), config.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            noise: NoiseState::new(&config.noise),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            rng,
            episode: 0,
            u_max,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut Mlp {
        &mut self.critic
    }

    pub fn actor_target(&self) -> &Mlp {
        &self.actor_target
    }

    pub fn critic_target(&self) -> &Mlp {
        &self.critic_target
    }

    pub fn targets_mut(&mut self) -> (&mut Mlp, &mut Mlp) {
        (&mut self.actor_target, &mut self.critic_target)
    }

    pub fn noise(&self) -> &NoiseState {
        &self.noise
    }

    pub fn noise_mut(&mut self) -> &mut NoiseState {
        &mut self.noise
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn set_episode(&mut self, episode: u64) {
        self.episode = episode;
    }

    pub fn normalize_obs(&self, obs: &Observation) -> [f64; OBS_DIM] {
        [obs.x_dot / self.u_max, (obs.z_ddot_meas - GRAVITY) / 10.0, obs.p]
    }

    /// Greedy policy output in `[0, u_max]`.
    pub fn act(&self, obs: &Observation) -> Result<f64, AgentError> {
        let u = self.actor.forward(&self.normalize_obs(obs))[0];
        if u.is_finite() {
            Ok(u)
        } else {
            Err(AgentError::NonFinite("actor output"))
        }
    }

    /// Q(s, a) from the online critic.
    pub fn q_value(&self, obs: &Observation, action: f64) -> f64 {
        let [a, b, c] = self.normalize_obs(obs);
        self.critic.forward(&[a, b, c, action / self.u_max])[0]
    }

    /// Policy output plus OU noise, clamped to `[0, u_max]`.
    pub fn explore(&mut self, obs: &Observation) -> Result<f64, AgentError> {
        let u = self.act(obs)?;
        let n = self.noise.sample(&mut self.rng);
        Ok((u + n).clamp(0.0, self.u_max))
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    pub fn ready_to_learn(&self) -> bool {
        self.buffer.len() >= self.config.warmup_steps.max(self.config.batch_size)
    }

    /// One update on a uniformly sampled minibatch from the replay buffer.
    pub fn update(&mut self) -> Result<UpdateStats, AgentError> {
        let need = self.config.batch_size;
        if self.buffer.len() < need {
            return Err(AgentError::InsufficientData { have: self.buffer.len(), need });
        }
        let idx = self.buffer.sample_indices(&mut self.rng, need);
        let batch: Vec<Transition> = idx.iter().map(|&i| *self.buffer.get(i).unwrap()).collect();
        self.update_on(&batch)
    }

    fn critic_inputs(&self, obs: &[f64], actions: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(actions.len() * (OBS_DIM + 1));
        for (o, a) in obs.chunks_exact(OBS_DIM).zip(actions) {
            out.extend_from_slice(o);
            out.push(a / self.u_max);
        }
        out
    }

    /// Critic regression followed by an actor ascent step on the given batch.
    pub fn update_on(&mut self, batch: &[Transition]) -> Result<UpdateStats, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::InsufficientData { have: 0, need: 1 });
        }
        let n = batch.len();
        let inv_n = 1.0 / n as f64;
        let mut obs = Vec::with_capacity(n * OBS_DIM);
        let mut next_obs = Vec::with_capacity(n * OBS_DIM);
        for t in batch {
            obs.extend(self.normalize_obs(&t.obs));
            next_obs.extend(self.normalize_obs(&t.next_obs));
        }
        let actions: Vec<f64> = batch.iter().map(|t| t.action).collect();

        // targets
        let next_actions = self.actor_target.forward_batch(&next_obs, n).output;
        let q_next = self.critic_target.forward_batch(&self.critic_inputs(&next_obs, &next_actions), n).output;
        let targets: Vec<f64> = batch
            .iter()
            .zip(&q_next)
            .map(|(t, &q)| td_target(t.reward * self.config.reward_scale, t.done, self.config.gamma, q))
            .collect();

        // critic: minimize mean squared TD error
        let cache = self.critic.forward_batch(&self.critic_inputs(&obs, &actions), n);
        let mut critic_loss = 0.0;
        let out_grad: Vec<f64> = cache
            .output
            .iter()
            .zip(&targets)
            .map(|(q, y)| {
                let e = q - y;
                critic_loss += e * e * inv_n;
                2.0 * e * inv_n
            })
            .collect();
        let mut grad = vec![0.0; self.critic.params().len()];
        self.critic.backward_batch(&cache, &out_grad, &mut grad);
        self.critic_opt.step(self.critic.params_mut(), &grad);

        // actor: ascend mean Q(s, μ(s)) through the updated critic
        let actor_cache = self.actor.forward_batch(&obs, n);
        let critic_cache = self.critic.forward_batch(&self.critic_inputs(&obs, &actor_cache.output), n);
        let actor_objective = critic_cache.output.iter().sum::<f64>() * inv_n;
        let mut scratch = vec![0.0; self.critic.params().len()];
        let input_grad = self.critic.backward_batch(&critic_cache, &vec![-inv_n; n], &mut scratch);
        let action_grad: Vec<f64> =
            input_grad.chunks_exact(OBS_DIM + 1).map(|g| g[OBS_DIM] / self.u_max).collect();
        let mut grad = vec![0.0; self.actor.params().len()];
        self.actor.backward_batch(&actor_cache, &action_grad, &mut grad);
        self.actor_opt.step(self.actor.params_mut(), &grad);

        if !(self.actor.all_finite() && self.critic.all_finite()) {
            return Err(AgentError::NonFinite("network parameters after update"));
        }
        Ok(UpdateStats { critic_loss, actor_objective })
    }

    /// Blends online parameters into the targets with `tau_soft`.
    pub fn soft_update(&mut self) {
        let tau = self.config.tau_soft;
        self.actor_target.blend_from(&self.actor, tau);
        self.critic_target.blend_from(&self.critic, tau);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // unit reward scale so critic targets equal raw rewards
    fn agent() -> DdpgAgent {
        DdpgAgent::new(AgentConfig { reward_scale: 1.0, ..Default::default() }, 2.0, 1).unwrap()
    }

    fn tr(reward: f64, done: bool) -> Transition {
        let o = Observation { x_dot: 0.8, z_ddot_meas: 10.1, p: 0.2 };
        let n = Observation { x_dot: 0.9, z_ddot_meas: 9.6, p: 0.25 };
        Transition { obs: o, action: 0.7, reward, next_obs: n, done }
    }

    #[test]
    fn zero_actor_outputs_midpoint() {
        let mut a = agent();
        a.actor_mut().params_mut().iter_mut().for_each(|p| *p = 0.0);
        for obs in [Observation { x_dot: 0.0, z_ddot_meas: 9.8, p: 0.0 }, Observation { x_dot: 1.7, z_ddot_meas: 3.0, p: 0.9 }] {
            assert_eq!(a.act(&obs).unwrap(), 1.0);
        }
    }

    #[test]
    fn zero_critic_outputs_zero() {
        let mut a = agent();
        a.critic_mut().params_mut().iter_mut().for_each(|p| *p = 0.0);
        assert_eq!(a.q_value(&tr(0.0, false).obs, 1.3), 0.0);
    }

    #[test]
    fn final_bias_shifts_q_linearly() {
        let mut a = agent();
        let obs = tr(0.0, false).obs;
        let before = a.q_value(&obs, 0.4);
        let last = a.critic().params().len() - 1;
        let bias = a.critic().params()[last];
        a.critic_mut().params_mut()[last] = 2.0 * bias;
        let after = a.q_value(&obs, 0.4);
        assert!((after - before - bias).abs() < 1e-15);
    }

    #[test]
    fn corrupted_actor_reports_non_finite() {
        let mut a = agent();
        a.actor_mut().params_mut()[0] = f64::NAN;
        assert!(matches!(a.act(&tr(0.0, false).obs), Err(AgentError::NonFinite(_))));
    }

    #[test]
    fn td_targets() {
        assert_eq!(td_target(-1.5, true, 0.99, 123.0), -1.5);
        assert!((td_target(-1.0, false, 0.99, -2.0) + 2.98).abs() < 1e-15);
    }

    #[test]
    fn update_requires_a_full_batch() {
        let mut a = agent();
        a.remember(tr(-1.0, false));
        assert!(matches!(a.update(), Err(AgentError::InsufficientData { have: 1, need: 64 })));
    }

    #[test]
    fn critic_converges_on_fixed_batch() {
        let mut a = agent();
        let batch = vec![tr(-1.0, true)];
        let losses: Vec<f64> = (0..300).map(|_| a.update_on(&batch).unwrap().critic_loss).collect();
        // Adam's momentum overshoots once the error is tiny, so monotonicity is
        // checked over the approach phase only.
        let settled = losses.iter().position(|&l| l < 0.01 * losses[0]).unwrap();
        assert!(settled > 10);
        for w in losses[10..=settled].windows(2) {
            assert!(w[1] < w[0], "{} then {}", w[0], w[1]);
        }
        assert!(losses[299] < 1e-4);
        assert!((a.q_value(&batch[0].obs, batch[0].action) + 1.0).abs() < 1e-2);
    }

    #[test]
    fn soft_update_identities() {
        let mut a = agent();
        let online = a.actor().params().to_vec();
        // fixed point
        a.soft_update();
        assert_eq!(a.actor_target().params(), &online[..]);

        a.actor_mut().params_mut().iter_mut().for_each(|p| *p = 1.0);
        a.targets_mut().0.params_mut().iter_mut().for_each(|p| *p = 0.0);
        a.soft_update();
        assert!(a.actor_target().params().iter().all(|&p| p == 1e-3));
    }

    #[test]
    fn explore_matches_policy_without_noise() {
        let cfg = AgentConfig {
            noise: NoiseConfig { initial_variance: 0.0, variance_floor: 0.0, ..Default::default() },
            ..Default::default()
        };
        let mut a = DdpgAgent::new(cfg, 2.0, 3).unwrap();
        let obs = tr(0.0, false).obs;
        for _ in 0..10 {
            assert_eq!(a.explore(&obs).unwrap(), a.act(&obs).unwrap());
        }
    }

    #[test]
    fn explore_stays_in_bounds_and_decays() {
        let mut a = agent();
        let obs = tr(0.0, false).obs;
        let mut last = a.noise().variance;
        for _ in 0..5000 {
            let u = a.explore(&obs).unwrap();
            assert!((0.0..=2.0).contains(&u));
            assert!(a.noise().variance <= last);
            last = a.noise().variance;
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = AgentConfig { gamma: 1.5, ..Default::default() };
        assert!(DdpgAgent::new(cfg, 2.0, 0).is_err());
        let cfg = AgentConfig { tau_soft: 0.0, ..Default::default() };
        assert!(DdpgAgent::new(cfg, 2.0, 0).is_err());
    }
}
