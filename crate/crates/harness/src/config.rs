use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swarm_core::protocols::observation_dim;
use swarm_core::{Activation, EnvConfig, PolicySpec, ProtocolConfig, SimConfig, TaskSpec, TrpoConfig};

use crate::checkpoint::CheckpointFormat;
use crate::error::{HarnessError, Result};

/// Network sizes that do not depend on the observation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub history_length: usize,
    pub slot_hidden1: usize,
    pub slot_hidden2: usize,
    pub trunk_hidden: usize,
    pub activation: Activation,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let spec = PolicySpec::new(2, 0);
        Self {
            history_length: spec.history_length,
            slot_hidden1: spec.slot_hidden1,
            slot_hidden2: spec.slot_hidden2,
            trunk_hidden: spec.trunk_hidden,
            activation: spec.activation,
        }
    }
}

/// Everything a training, evaluation or replay run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskSpec,
    pub protocol: ProtocolConfig,
    pub sim: SimConfig,
    pub policy: PolicyConfig,
    pub trpo: TrpoConfig,
    pub master_seed: u64,
    pub output_directory: PathBuf,
    pub eval_episodes: usize,
    pub checkpoint_format: CheckpointFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: TaskSpec::Edge(Default::default()),
            protocol: ProtocolConfig::default(),
            sim: SimConfig::default(),
            policy: PolicyConfig::default(),
            trpo: TrpoConfig::default(),
            master_seed: 0,
            output_directory: PathBuf::from("runs/default"),
            eval_episodes: 20,
            checkpoint_format: CheckpointFormat::Binary,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fully resolved config, every default written out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.env().validate()?;
        self.trpo.validate()?;
        self.spec()?.validate()?;
        if self.eval_episodes == 0 {
            return Err(HarnessError::Config("eval_episodes must be >= 1".into()));
        }
        if let TaskSpec::Link(link) = &self.task {
            if link.link_radius != self.protocol.comm_radius {
                return Err(HarnessError::Config(format!(
                    "task.link_radius ({}) must equal protocol.comm_radius ({})",
                    link.link_radius, self.protocol.comm_radius
                )));
            }
        }
        Ok(())
    }

    pub fn env(&self) -> EnvConfig {
        EnvConfig {
            sim: self.sim.clone(),
            protocol: self.protocol.clone(),
            task: self.task.clone(),
            episode_length: self.trpo.episode_length,
        }
    }

    pub fn spec(&self) -> Result<PolicySpec> {
        Ok(PolicySpec {
            history_length: self.policy.history_length,
            obs_dim: observation_dim(&self.protocol, &self.task)?,
            action_dim: 2,
            slot_hidden1: self.policy.slot_hidden1,
            slot_hidden2: self.policy.slot_hidden2,
            trunk_hidden: self.policy.trunk_hidden,
            activation: self.policy.activation,
        })
    }
}
