use std::fs;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use super::eval::evaluate;
use super::io::write_csv;
use super::{episode_seed, mix_seed, HarnessError, Metrics, MetricsAccumulator};
use crate::agent::{AgentConfig, DdpgAgent};
use crate::env::{BumpEnv, EnvConfig, Environment, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub seed: u64,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    /// Episodes between checkpoints written to the output directory; 0 keeps only the final one.
    pub checkpoint_interval: usize,
    /// Episodes between greedy evaluations on the held-out track; 0 disables them.
    pub eval_interval: usize,
    /// Seed of the held-out evaluation track.
    pub eval_track_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            seed: 0,
            env: EnvConfig::default(),
            agent: AgentConfig::default(),
            checkpoint_interval: 0,
            eval_interval: 0,
            eval_track_seed: 12_345,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.episodes == 0 {
            return Err(HarnessError::Config("episodes must be > 0".into()));
        }
        self.env.validate()?;
        self.agent.validate()?;
        Ok(())
    }

    /// Local environment on a fixed track drawn from `eval_track_seed`.
    pub fn held_out_env(&self) -> Result<BumpEnv, HarnessError> {
        let mut cfg = self.env.clone();
        cfg.episode.randomize_track = false;
        cfg.episode.fixed_track = None;
        cfg.episode.track_seed = self.eval_track_seed;
        Ok(BumpEnv::new(cfg)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub seed: u64,
    pub steps: usize,
    pub updates: usize,
    pub mean_critic_loss: f64,
    pub noise_variance: f64,
    pub peak_abs_acc_dev: f64,
    pub rmse_acc_dev: f64,
    pub rmse_vel_tracking: f64,
    pub mean_velocity: f64,
    pub episode_return: f64,
}

impl EpisodeRecord {
    pub fn metrics(&self) -> Metrics {
        Metrics {
            peak_abs_acc_dev: self.peak_abs_acc_dev,
            rmse_acc_dev: self.rmse_acc_dev,
            rmse_vel_tracking: self.rmse_vel_tracking,
            mean_velocity: self.mean_velocity,
            episode_return: self.episode_return,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EvalCsvRow {
    episode: usize,
    peak_abs_acc_dev: f64,
    rmse_acc_dev: f64,
    rmse_vel_tracking: f64,
    mean_velocity: f64,
    episode_return: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub agent: DdpgAgent,
    pub episodes: Vec<EpisodeRecord>,
    /// Greedy held-out evaluations as (episodes completed, metrics).
    pub evaluations: Vec<(usize, Metrics)>,
}

impl TrainReport {
    pub fn seeds(&self) -> Vec<u64> {
        self.episodes.iter().map(|e| e.seed).collect()
    }

    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.episode_return).collect()
    }
}

pub const TRAIN_METRICS_FILE: &str = "train_metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const RETURN_CURVE_FILE: &str = "return_curve.csv";
pub const HELD_OUT_EVAL_FILE: &str = "eval_metrics.csv";

/// Runs the DDPG episode loop against `env`.
///
/// Every step after warmup performs one minibatch update and one soft target
/// update. With a local or remote environment that honors the reset/step
/// contract, the result depends only on `config`.
pub fn train<E: Environment + ?Sized>(
    config: &TrainConfig,
    env: &mut E,
    out_dir: Option<&Path>,
) -> Result<TrainReport, HarnessError> {
    config.validate()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let (_, u_max) = env.action_bounds();
    let mut agent = DdpgAgent::new(config.agent.clone(), u_max, mix_seed(config.seed, 0))?;
    let x_dot_d = config.env.reward.x_dot_d;
    let mut held_out = if config.eval_interval > 0 { Some(config.held_out_env()?) } else { None };
    let mut records = Vec::with_capacity(config.episodes);
    let mut evaluations = Vec::new();

    for ep in 0..config.episodes {
        let seed = episode_seed(config.seed, ep);
        let mut obs = env.reset(seed)?;
        agent.noise_mut().reset_value();
        let mut acc = MetricsAccumulator::new(x_dot_d);
        let mut updates = 0usize;
        let mut loss_sum = 0.0;
        loop {
            let u = agent.explore(&obs)?;
            let out = env.step(u)?;
            agent.remember(Transition {
                obs,
                action: u,
                reward: out.reward,
                next_obs: out.obs,
                done: out.done && !out.info.truncated,
            });
            acc.record(&out);
            if agent.ready_to_learn() {
                loss_sum += agent.update()?.critic_loss;
                agent.soft_update();
                updates += 1;
            }
            obs = out.obs;
            if out.done {
                break;
            }
        }
        agent.set_episode(ep as u64 + 1);
        let m = acc.finish();
        records.push(EpisodeRecord {
            episode: ep,
            seed,
            steps: acc.steps(),
            updates,
            mean_critic_loss: if updates > 0 { loss_sum / updates as f64 } else { 0.0 },
            noise_variance: agent.noise().variance,
            peak_abs_acc_dev: m.peak_abs_acc_dev,
            rmse_acc_dev: m.rmse_acc_dev,
            rmse_vel_tracking: m.rmse_vel_tracking,
            mean_velocity: m.mean_velocity,
            episode_return: m.episode_return,
        });
        info!(
            "episode {ep}: steps {} return {:.2} peak {:.3} mean v {:.3}",
            acc.steps(),
            m.episode_return,
            m.peak_abs_acc_dev,
            m.mean_velocity
        );

        let completed = ep + 1;
        if let Some(env) = held_out.as_mut() {
            if completed % config.eval_interval == 0 {
                let report = evaluate(&agent, env, 1, x_dot_d, config.eval_track_seed)?;
                evaluations.push((completed, report.metrics));
            }
        }
        if let Some(dir) = out_dir {
            if config.checkpoint_interval > 0 && completed % config.checkpoint_interval == 0 {
                agent.save_checkpoint(&dir.join(format!("checkpoint_ep{completed:05}.json")))?;
            }
        }
    }

    if let Some(dir) = out_dir {
        agent.save_checkpoint(&dir.join(CHECKPOINT_FILE))?;
        write_csv(&dir.join(TRAIN_METRICS_FILE), &records)?;
        let curve: Vec<(f64, f64)> = records.iter().map(|r| (r.episode as f64, r.episode_return)).collect();
        super::io::write_series(&dir.join(RETURN_CURVE_FILE), ("episode", "episode_return"), &curve)?;
        if !evaluations.is_empty() {
            let rows: Vec<EvalCsvRow> = evaluations
                .iter()
                .map(|(e, m)| EvalCsvRow {
                    episode: *e,
                    peak_abs_acc_dev: m.peak_abs_acc_dev,
                    rmse_acc_dev: m.rmse_acc_dev,
                    rmse_vel_tracking: m.rmse_vel_tracking,
                    mean_velocity: m.mean_velocity,
                    episode_return: m.episode_return,
                })
                .collect();
            write_csv(&dir.join(HELD_OUT_EVAL_FILE), &rows)?;
        }
    }
    Ok(TrainReport { agent, episodes: records, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::io::read_csv;

    fn tiny_config() -> TrainConfig {
        let mut cfg = TrainConfig { episodes: 1, ..Default::default() };
        cfg.env.episode.max_steps = 10;
        cfg.agent.warmup_steps = 50;
        cfg
    }

    #[test]
    fn warmup_gates_updates() {
        let cfg = tiny_config();
        let mut env = BumpEnv::new(cfg.env.clone()).unwrap();
        let report = train(&cfg, &mut env, None).unwrap();
        assert_eq!(report.episodes[0].updates, 0);
        assert!(report.agent.buffer().len() <= 10);
        assert_eq!(report.agent.actor(), DdpgAgent::new(cfg.agent.clone(), 2.0, mix_seed(0, 0)).unwrap().actor());
    }

    #[test]
    fn writes_artifacts_and_is_reproducible() {
        let mut cfg = tiny_config();
        cfg.episodes = 3;
        cfg.env.episode.max_steps = 80;
        cfg.agent.warmup_steps = 64;
        cfg.agent.hidden = vec![8, 8];
        cfg.eval_interval = 3;
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            let mut env = BumpEnv::new(cfg.env.clone()).unwrap();
            let report = train(&cfg, &mut env, Some(d.path())).unwrap();
            assert!(report.episodes.iter().map(|e| e.updates).sum::<usize>() > 0);
            assert_eq!(report.evaluations.len(), 1);
            let rows: Vec<EpisodeRecord> = read_csv(&d.path().join(TRAIN_METRICS_FILE)).unwrap();
            assert_eq!(rows, report.episodes);
        }
        let a = fs::read(dirs[0].path().join(TRAIN_METRICS_FILE)).unwrap();
        let b = fs::read(dirs[1].path().join(TRAIN_METRICS_FILE)).unwrap();
        assert_eq!(a, b);
        assert!(dirs[0].path().join(CHECKPOINT_FILE).exists());
        assert!(dirs[0].path().join(HELD_OUT_EVAL_FILE).exists());
    }

    #[test]
    fn zero_episodes_rejected() {
        let cfg = TrainConfig { episodes: 0, ..Default::default() };
        let mut env = BumpEnv::new(cfg.env.clone()).unwrap();
        assert!(matches!(train(&cfg, &mut env, None), Err(HarnessError::Config(_))));
    }
}
