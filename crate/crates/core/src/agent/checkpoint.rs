//! Versioned JSON checkpoints. Floats are written in shortest round-trip
//! decimal form, so a save/load cycle is bit-exact.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, AgentConfig, AgentError, DdpgAgent, Mlp, NoiseState, ReplayBuffer};

pub const CHECKPOINT_FORMAT: &str = "bumprl-ddpg-checkpoint";
pub const CHECKPOINT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u64,
    config: AgentConfig,
    u_max: f64,
    episode: u64,
    actor: Mlp,
    critic: Mlp,
    actor_target: Mlp,
    critic_target: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    noise: NoiseState,
    rng: ChaCha8Rng,
}

fn checked(net: Mlp) -> Result<Mlp, AgentError> {
    Mlp::from_parts(net.sizes().to_vec(), net.output_activation(), net.params().to_vec())
}

impl DdpgAgent {
    pub fn to_checkpoint_json(&self) -> Result<String, AgentError> {
        let doc = Document {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            u_max: self.u_max,
            episode: self.episode,
            actor: self.actor.clone(),
            critic: self.critic.clone(),
            actor_target: self.actor_target.clone(),
            critic_target: self.critic_target.clone(),
            actor_opt: self.actor_opt.clone(),
            critic_opt: self.critic_opt.clone(),
            noise: self.noise.clone(),
            rng: self.rng.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| AgentError::Format(e.to_string()))
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self, AgentError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| AgentError::Format(format!("not valid JSON: {e}")))?;
        if value.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(AgentError::Format(format!("missing \"format\": \"{CHECKPOINT_FORMAT}\" tag")));
        }
        let found = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| AgentError::Format("missing integer \"version\"".into()))?;
        if found != CHECKPOINT_VERSION {
            return Err(AgentError::FormatVersionMismatch { found, expected: CHECKPOINT_VERSION });
        }
        let doc: Document = serde_json::from_value(value).map_err(|e| AgentError::Format(e.to_string()))?;
        doc.config.validate()?;
        let buffer = ReplayBuffer::new(doc.config.buffer_capacity);
        Ok(Self {
            config: doc.config,
            u_max: doc.u_max,
            episode: doc.episode,
            actor: checked(doc.actor)?,
            critic: checked(doc.critic)?,
            actor_target: checked(doc.actor_target)?,
            critic_target: checked(doc.critic_target)?,
            actor_opt: doc.actor_opt,
            critic_opt: doc.critic_opt,
            noise: doc.noise,
            rng: doc.rng,
            buffer,
        })
    }

    /// Writes parameters, optimizer moments, noise and RNG state. The replay
    /// buffer is not persisted.
    pub fn save_checkpoint(&self, path: &Path) -> Result<(), AgentError> {
        fs::write(path, self.to_checkpoint_json()?)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self, AgentError> {
        Self::from_checkpoint_json(&fs::read_to_string(path)?)
    }
}
