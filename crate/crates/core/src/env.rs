//! Episodic environment: half-car dynamics, sensors and the reward variants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, DynamicsError, VehicleParams, VehicleState};
use crate::sensors::{self, CameraSpec, Observation, SensorNoise};
use crate::terrain::{random_track, TerrainError, TerrainProfile, TrackSpec};
use crate::GRAVITY;

/// Acceleration weight used by the conditional reward once a bump is in view.
pub const CONDITIONAL_HIGH_WEIGHT: f64 = 100.0;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("environment must be reset before stepping")]
    NotReset,
    #[error("action is not finite: {0}")]
    NonFiniteAction(f64),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("remote environment: {0}")]
    Remote(#[from] crate::protocol::ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardVariant {
    /// Constant unit weight on the acceleration term.
    Static,
    /// Weight jumps to 100 while the preview exceeds `threshold`.
    Conditional { threshold: f64 },
    /// Weight grows linearly with the preview: `slope * p`.
    FunctionWeighted { slope: f64 },
}

impl RewardVariant {
    pub fn conditional() -> Self {
        Self::Conditional { threshold: 0.05 }
    }

    pub fn function_weighted() -> Self {
        Self::FunctionWeighted { slope: 100.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Conditional { .. } => "conditional",
            Self::FunctionWeighted { .. } => "function_weighted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSpec {
    pub variant: RewardVariant,
    /// Weight on the squared velocity-tracking error.
    pub w2: f64,
    /// Desired velocity (m/s).
    pub x_dot_d: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self { variant: RewardVariant::function_weighted(), w2: 75.0, x_dot_d: 1.0 }
    }
}

impl RewardSpec {
    pub fn with_variant(variant: RewardVariant) -> Self {
        Self { variant, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.w2 > 0.0 && self.w2.is_finite()) {
            return Err(format!("w2 must be > 0, got {}", self.w2));
        }
        if !self.x_dot_d.is_finite() || self.x_dot_d < 0.0 {
            return Err(format!("x_dot_d must be >= 0, got {}", self.x_dot_d));
        }
        match self.variant {
            RewardVariant::Conditional { threshold } if !(threshold > 0.0 && threshold < 1.0) => {
                Err(format!("threshold must lie in (0, 1), got {threshold}"))
            }
            RewardVariant::FunctionWeighted { slope } if !(slope > 0.0 && slope.is_finite()) => {
                Err(format!("slope must be > 0, got {slope}"))
            }
            _ => Ok(()),
        }
    }

    /// Weight applied to `(z̈ - 9.8)²` for preview `p`.
    pub fn acceleration_weight(&self, p: f64) -> f64 {
        match self.variant {
            RewardVariant::Static => 1.0,
            RewardVariant::Conditional { threshold } => {
                if p > threshold {
                    CONDITIONAL_HIGH_WEIGHT
                } else {
                    1.0
                }
            }
            RewardVariant::FunctionWeighted { slope } => slope * p,
        }
    }
}

/// Negative weighted quadratic cost; zero exactly at nominal gravity and the
/// desired speed.
pub fn reward(obs: &Observation, spec: &RewardSpec) -> f64 {
    let acc_dev = obs.z_ddot_meas - GRAVITY;
    let vel_dev = obs.x_dot - spec.x_dot_d;
    -spec.acceleration_weight(obs.p) * acc_dev * acc_dev - spec.w2 * vel_dev * vel_dev
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    /// Control period (s).
    pub dt: f64,
    /// RK4 sub-steps per control period.
    pub substeps: usize,
    pub max_steps: usize,
    pub initial_x_dot: f64,
    /// Draw a fresh track from `track` on every reset, seeded by the reset seed.
    pub randomize_track: bool,
    pub track: TrackSpec,
    /// Track used when `randomize_track` is off. When absent, one is drawn
    /// from `track` with `track_seed`.
    pub fixed_track: Option<TerrainProfile>,
    pub track_seed: u64,
    pub sensor_noise: SensorNoise,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 120.0,
            substeps: 10,
            max_steps: 3600,
            initial_x_dot: 0.0,
            randomize_track: true,
            track: TrackSpec::default(),
            fixed_track: None,
            track_seed: 0,
            sensor_noise: SensorNoise::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn with_fixed_track(track: TerrainProfile) -> Self {
        Self { randomize_track: false, fixed_track: Some(track), ..Self::default() }
    }
}

/// Everything needed to build a [`BumpEnv`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub vehicle: VehicleParams,
    pub camera: CameraSpec,
    pub reward: RewardSpec,
    pub episode: EpisodeConfig,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.vehicle.validate()?;
        self.camera.validate().map_err(EnvError::InvalidConfig)?;
        self.reward.validate().map_err(EnvError::InvalidConfig)?;
        let ep = &self.episode;
        if !(ep.dt > 0.0 && ep.dt.is_finite()) {
            return Err(EnvError::InvalidConfig(format!("dt must be > 0, got {}", ep.dt)));
        }
        if ep.max_steps == 0 || ep.substeps == 0 {
            return Err(EnvError::InvalidConfig("max_steps and substeps must be > 0".into()));
        }
        if !ep.initial_x_dot.is_finite() || ep.initial_x_dot < 0.0 {
            return Err(EnvError::InvalidConfig("initial_x_dot must be >= 0".into()));
        }
        ep.track.validate()?;
        Ok(())
    }
}

/// Diagnostics reported alongside every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub x: f64,
    pub t: f64,
    pub z_ddot_model: f64,
    /// Command after clamping to `[0, u_max]`.
    pub u_x: f64,
    pub z: f64,
    pub theta: f64,
    /// The episode ended on the step limit rather than at the end of the track.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub action: f64,
    pub reward: f64,
    pub next_obs: Observation,
    /// True only at a terminal state; step-limit truncation still bootstraps.
    pub done: bool,
}

/// The reset/step contract shared by the local simulator and remote clients.
pub trait Environment {
    fn reset(&mut self, seed: u64) -> Result<Observation, EnvError>;
    fn step(&mut self, action: f64) -> Result<StepOutcome, EnvError>;
    /// Inclusive bounds of the commanded velocity.
    fn action_bounds(&self) -> (f64, f64);
}

#[derive(Debug, Clone)]
struct Episode {
    state: VehicleState,
    terrain: TerrainProfile,
    steps: usize,
    last_action: f64,
    rng: ChaCha8Rng,
    finished: bool,
}

#[derive(Debug, Clone)]
pub struct BumpEnv {
    config: EnvConfig,
    fixed_track: Option<TerrainProfile>,
    episode: Option<Episode>,
}

impl BumpEnv {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let fixed_track = if config.episode.randomize_track {
            None
        } else {
            Some(match &config.episode.fixed_track {
                Some(t) => TerrainProfile::new(t.bumps.clone(), t.track_length)?,
                None => random_track(config.episode.track_seed, &config.episode.track)?,
            })
        };
        Ok(Self { config, fixed_track, episode: None })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> Option<&VehicleState> {
        self.episode.as_ref().map(|e| &e.state)
    }

    pub fn terrain(&self) -> Option<&TerrainProfile> {
        self.episode.as_ref().map(|e| &e.terrain)
    }

    fn observe(&self, ep: &mut Episode) -> Result<Observation, EnvError> {
        let c = &self.config;
        Ok(sensors::observe(
            &ep.state,
            ep.last_action,
            &ep.terrain,
            &c.camera,
            &c.vehicle,
            &c.episode.sensor_noise,
            &mut ep.rng,
        )?)
    }
}

impl Environment for BumpEnv {
    fn reset(&mut self, seed: u64) -> Result<Observation, EnvError> {
        let terrain = match &self.fixed_track {
            Some(t) => t.clone(),
            None => random_track(seed, &self.config.episode.track)?,
        };
        let x_dot = self.config.episode.initial_x_dot;
        let mut ep = Episode {
            state: VehicleState { x_dot, ..VehicleState::at_rest() },
            terrain,
            steps: 0,
            last_action: x_dot,
            // separate stream from the track generator
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0B5E_4A7E_0001),
            finished: false,
        };
        let obs = self.observe(&mut ep)?;
        self.episode = Some(ep);
        Ok(obs)
    }

    fn step(&mut self, action: f64) -> Result<StepOutcome, EnvError> {
        let mut ep = match self.episode.take() {
            Some(ep) if !ep.finished => ep,
            other => {
                self.episode = other;
                return Err(EnvError::NotReset);
            }
        };
        if !action.is_finite() {
            self.episode = Some(ep);
            return Err(EnvError::NonFiniteAction(action));
        }
        let c = &self.config;
        let u_x = c.vehicle.clamp_command(action);
        ep.state = dynamics::advance(&ep.state, u_x, &c.vehicle, &ep.terrain, c.episode.dt, c.episode.substeps)?;
        ep.steps += 1;
        ep.last_action = u_x;
        let z_ddot_model = dynamics::derivatives(&ep.state, u_x, &c.vehicle, &ep.terrain)?.z_ddot;
        let obs = self.observe(&mut ep)?;
        let r = reward(&obs, &self.config.reward);
        let reached_end = ep.state.x >= ep.terrain.track_length;
        let truncated = !reached_end && ep.steps >= self.config.episode.max_steps;
        let done = reached_end || truncated;
        ep.finished = done;
        let info = StepInfo {
            x: ep.state.x,
            t: ep.steps as f64 * self.config.episode.dt,
            z_ddot_model,
            u_x,
            z: ep.state.z,
            theta: ep.state.theta,
            truncated,
        };
        self.episode = Some(ep);
        Ok(StepOutcome { obs, reward: r, done, info })
    }

    fn action_bounds(&self) -> (f64, f64) {
        (0.0, self.config.vehicle.u_max)
    }
}
