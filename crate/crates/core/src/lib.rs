//! Half-car bump simulator with a from-scratch DDPG agent that learns to
//! modulate longitudinal velocity so that vertical acceleration stays low
//! while crossing terrain bumps.

pub mod agent;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod harness;
pub mod protocol;
pub mod sensors;
pub mod terrain;

pub use agent::{AgentConfig, DdpgAgent, Mlp, NoiseState, ReplayBuffer};
pub use config::RunConfig;
pub use dynamics::{StateDerivative, VehicleParams, VehicleState};
pub use env::{BumpEnv, EnvConfig, EpisodeConfig, Environment, RewardSpec, RewardVariant, StepInfo, StepOutcome, Transition};
pub use harness::{ConstantVelocity, EvalReport, Metrics, Policy, TrainConfig, TrainReport};
pub use protocol::{RemoteEnv, Server};
pub use sensors::{CameraSpec, Observation, SensorNoise};
pub use terrain::{Bump, TerrainProfile, TrackSpec};

/// Nominal IMU reading at rest, in m/s².
pub const GRAVITY: f64 = 9.8;
