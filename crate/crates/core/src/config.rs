//! The JSON run configuration read by the command-line tool.
//!
//! Every section and key is optional; missing keys take the defaults below and
//! unknown keys are rejected. The fully resolved document is written next to
//! every run's outputs so the run can be repeated from it alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentConfig;
use crate::dynamics::VehicleParams;
use crate::env::{EnvConfig, EpisodeConfig, RewardSpec};
use crate::harness::{default_sweep_track, TrainConfig};
use crate::sensors::{CameraSpec, SensorNoise};
use crate::terrain::{TerrainProfile, TrackSpec};

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainSection {
    /// Generator for training tracks and for the held-out track.
    pub track: TrackSpec,
    /// Fresh random track per training episode; otherwise every episode uses
    /// `fixed_track`, or the track drawn from `track_seed`.
    pub randomize: bool,
    pub fixed_track: Option<TerrainProfile>,
    pub track_seed: u64,
    /// Seed of the held-out evaluation track.
    pub held_out_seed: u64,
    /// Track for velocity sweeps.
    pub sweep_track: TerrainProfile,
}

impl Default for TerrainSection {
    fn default() -> Self {
        Self {
            track: TrackSpec::default(),
            randomize: true,
            fixed_track: None,
            track_seed: 0,
            held_out_seed: 12_345,
            sweep_track: default_sweep_track(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub episodes: usize,
    pub seed: u64,
    /// Control period (s).
    pub dt: f64,
    pub substeps: usize,
    pub max_steps: usize,
    pub initial_x_dot: f64,
    pub sensor_noise: SensorNoise,
    pub checkpoint_interval: usize,
    pub eval_interval: usize,
    /// Greedy evaluation episodes run by `eval`.
    pub eval_episodes: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let ep = EpisodeConfig::default();
        let tc = TrainConfig::default();
        Self {
            episodes: tc.episodes,
            seed: tc.seed,
            dt: ep.dt,
            substeps: ep.substeps,
            max_steps: ep.max_steps,
            initial_x_dot: ep.initial_x_dot,
            sensor_noise: ep.sensor_noise,
            checkpoint_interval: tc.checkpoint_interval,
            eval_interval: tc.eval_interval,
            eval_episodes: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs/latest") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub vehicle: VehicleParams,
    pub terrain: TerrainSection,
    pub camera: CameraSpec,
    pub reward: RewardSpec,
    pub agent: AgentConfig,
    pub train: TrainSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_json(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn env_config(&self) -> EnvConfig {
        let t = &self.train;
        EnvConfig {
            vehicle: self.vehicle.clone(),
            camera: self.camera.clone(),
            reward: self.reward.clone(),
            episode: EpisodeConfig {
                dt: t.dt,
                substeps: t.substeps,
                max_steps: t.max_steps,
                initial_x_dot: t.initial_x_dot,
                randomize_track: self.terrain.randomize,
                track: self.terrain.track.clone(),
                fixed_track: self.terrain.fixed_track.clone(),
                track_seed: self.terrain.track_seed,
                sensor_noise: t.sensor_noise.clone(),
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            episodes: self.train.episodes,
            seed: self.train.seed,
            env: self.env_config(),
            agent: self.agent.clone(),
            checkpoint_interval: self.train.checkpoint_interval,
            eval_interval: self.train.eval_interval,
            eval_track_seed: self.terrain.held_out_seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.train.eval_episodes == 0 {
            return Err(ConfigError::Invalid("train.eval_episodes must be > 0".into()));
        }
        Ok(())
    }

    /// Writes the resolved document to `dir/resolved_config.json`.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf, ConfigError> {
        let path = dir.join(RESOLVED_CONFIG_FILE);
        fs::create_dir_all(dir)
            .and_then(|_| fs::write(&path, self.to_json() + "\n"))
            .map_err(|source| ConfigError::Write { path: path.clone(), source })?;
        Ok(path)
    }
}
