use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::{write_csv, write_series, MetricsRow, SweepCsvRow, TraceRow};
use super::{mix_seed, HarnessError, Metrics, MetricsAccumulator};
use crate::agent::DdpgAgent;
use crate::env::{BumpEnv, EnvConfig, Environment};
use crate::sensors::Observation;
use crate::terrain::TerrainProfile;
use crate::GRAVITY;

/// Anything that maps an observation to a velocity command without side effects.
pub trait Policy {
    fn action(&self, obs: &Observation) -> Result<f64, HarnessError>;
    fn label(&self) -> String;
}

/// Open-loop baseline: the same command at every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantVelocity(pub f64);

impl Policy for ConstantVelocity {
    fn action(&self, _obs: &Observation) -> Result<f64, HarnessError> {
        Ok(self.0)
    }

    fn label(&self) -> String {
        format!("constant_{}", self.0)
    }
}

/// Greedy actor, no exploration noise.
impl Policy for DdpgAgent {
    fn action(&self, obs: &Observation) -> Result<f64, HarnessError> {
        Ok(self.act(obs)?)
    }

    fn label(&self) -> String {
        "actor".into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub label: String,
    /// Aggregate over episodes: worst peak, mean of the rest.
    pub metrics: Metrics,
    pub per_episode: Vec<Metrics>,
    pub traces: Vec<Vec<TraceRow>>,
}

pub const EVAL_METRICS_FILE: &str = "metrics.csv";
pub const ACCEL_SERIES_FILE: &str = "acceleration_series.csv";
pub const VELOCITY_SERIES_FILE: &str = "velocity_series.csv";

impl EvalReport {
    /// Writes `metrics.csv`, one `trace_epNNN.csv` per episode, and two-column
    /// acceleration and velocity series of the first episode.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        let m = &self.metrics;
        let row = MetricsRow {
            policy: self.label.clone(),
            episodes: self.per_episode.len(),
            peak_abs_acc_dev: m.peak_abs_acc_dev,
            rmse_acc_dev: m.rmse_acc_dev,
            rmse_vel_tracking: m.rmse_vel_tracking,
            mean_velocity: m.mean_velocity,
            episode_return: m.episode_return,
        };
        write_csv(&dir.join(EVAL_METRICS_FILE), &[row])?;
        for (i, trace) in self.traces.iter().enumerate() {
            write_csv(&dir.join(format!("trace_ep{i:03}.csv")), trace)?;
        }
        if let Some(first) = self.traces.first() {
            let acc: Vec<_> = first.iter().map(|r| (r.t, r.z_ddot_meas - GRAVITY)).collect();
            write_series(&dir.join(ACCEL_SERIES_FILE), ("t", "acc_dev"), &acc)?;
            let vel: Vec<_> = first.iter().map(|r| (r.t, r.x_dot)).collect();
            write_series(&dir.join(VELOCITY_SERIES_FILE), ("t", "x_dot"), &vel)?;
        }
        Ok(())
    }
}

/// Noise-free rollouts of `policy`. Episode `i` resets with `mix_seed(seed, i)`.
pub fn evaluate<P, E>(policy: &P, env: &mut E, episodes: usize, x_dot_d: f64, seed: u64) -> Result<EvalReport, HarnessError>
where
    P: Policy + ?Sized,
    E: Environment + ?Sized,
{
    let mut per_episode = Vec::with_capacity(episodes);
    let mut traces = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut obs = env.reset(mix_seed(seed, i as u64))?;
        let mut acc = MetricsAccumulator::new(x_dot_d);
        let mut trace = Vec::new();
        loop {
            let u = policy.action(&obs)?;
            let out = env.step(u)?;
            acc.record(&out);
            trace.push(TraceRow {
                t: out.info.t,
                x: out.info.x,
                x_dot: out.obs.x_dot,
                u_x: out.info.u_x,
                z: out.info.z,
                theta: out.info.theta,
                z_ddot_meas: out.obs.z_ddot_meas,
                p: out.obs.p,
                reward: out.reward,
            });
            obs = out.obs;
            if out.done {
                break;
            }
        }
        per_episode.push(acc.finish());
        traces.push(trace);
    }
    Ok(EvalReport { label: policy.label(), metrics: Metrics::aggregate(&per_episode), per_episode, traces })
}

/// Counts excursions of |z̈_meas − 9.8| above `threshold`. Excursions closer
/// than `merge_gap` seconds belong to the same event, so the front and rear
/// axle crossing one bump count once.
pub fn count_events(trace: &[TraceRow], threshold: f64, merge_gap: f64) -> usize {
    let mut events = 0;
    let mut last_above: Option<f64> = None;
    for r in trace {
        if (r.z_ddot_meas - GRAVITY).abs() > threshold {
            match last_above {
                Some(t) if r.t - t < merge_gap => {}
                _ => events += 1,
            }
            last_above = Some(r.t);
        }
    }
    events
}

/// RMS of |z̈_meas − 9.8| when driving `env_config`'s vehicle and sensors at
/// `velocity` over flat ground.
pub fn flat_noise_floor(env_config: &EnvConfig, velocity: f64, seed: u64) -> Result<f64, HarnessError> {
    let mut cfg = env_config.clone();
    let len = cfg.episode.track.track_length;
    cfg.episode.randomize_track = false;
    cfg.episode.fixed_track = Some(TerrainProfile::flat(len));
    let mut env = BumpEnv::new(cfg)?;
    let report = evaluate(&ConstantVelocity(velocity), &mut env, 1, velocity, seed)?;
    Ok(report.metrics.rmse_acc_dev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub velocity: f64,
    pub metrics: Metrics,
}

/// Single bump of default height at 1.5 m on a 3 m track.
pub fn default_sweep_track() -> TerrainProfile {
    TerrainProfile::single_bump(3.0, 1.5, 0.05).expect("valid constant track")
}

/// `min, min+step, ...` up to `max` inclusive (with a small tolerance so
/// 0.1..1.0 by 0.1 gives 10 points).
pub fn velocity_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, HarnessError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(HarnessError::Config(format!("step must be > 0, got {step}")));
    }
    if !(min.is_finite() && max.is_finite()) || min < 0.0 || max < min {
        return Err(HarnessError::Config(format!("need 0 <= min <= max, got {min}..{max}")));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    // round away accumulated binary noise so 0.30000000000000004 prints as 0.3
    Ok((0..=n).map(|i| ((min + i as f64 * step) * 1e9).round() / 1e9).collect())
}

/// One constant-command evaluation per velocity on `track`, starting at the
/// commanded speed. Rows come back sorted by velocity.
pub fn sweep_velocities(
    env_config: &EnvConfig,
    track: &TerrainProfile,
    velocities: &[f64],
    out_dir: Option<&Path>,
) -> Result<Vec<SweepRow>, HarnessError> {
    let mut vs = velocities.to_vec();
    if vs.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(HarnessError::Config("velocities must be finite and >= 0".into()));
    }
    vs.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(vs.len());
    for v in vs {
        let mut cfg = env_config.clone();
        cfg.episode.randomize_track = false;
        cfg.episode.fixed_track = Some(track.clone());
        cfg.episode.initial_x_dot = v;
        if v > 0.0 {
            // enough time to clear the whole track with margin
            let needed = (1.2 * track.track_length / (v * cfg.episode.dt)).ceil() as usize;
            cfg.episode.max_steps = cfg.episode.max_steps.max(needed);
        }
        let mut env = BumpEnv::new(cfg)?;
        let report = evaluate(&ConstantVelocity(v), &mut env, 1, env_config.reward.x_dot_d, 0)?;
        rows.push(SweepRow { velocity: v, metrics: report.metrics });
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let csv_rows: Vec<SweepCsvRow> = rows
            .iter()
            .map(|r| SweepCsvRow {
                velocity: r.velocity,
                peak_abs_acc_dev: r.metrics.peak_abs_acc_dev,
                rmse_acc_dev: r.metrics.rmse_acc_dev,
                rmse_vel_tracking: r.metrics.rmse_vel_tracking,
                mean_velocity: r.metrics.mean_velocity,
                episode_return: r.metrics.episode_return,
            })
            .collect();
        write_csv(&dir.join(SWEEP_FILE), &csv_rows)?;
        let series: Vec<_> = rows.iter().map(|r| (r.velocity, r.metrics.peak_abs_acc_dev)).collect();
        write_series(&dir.join(SWEEP_SERIES_FILE), ("velocity", "peak_abs_acc_dev"), &series)?;
    }
    Ok(rows)
}

pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_SERIES_FILE: &str = "sweep_peak_series.csv";
