//! Training, evaluation and replay around `swarm-core`, plus the `swarm`
//! command line tool.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod eval;
pub mod replay;
pub mod training;

pub use checkpoint::{Checkpoint, CheckpointFormat};
pub use config::{PolicyConfig, RunConfig};
pub use error::{HarnessError, Result};
pub use eval::{evaluate, EvalMetrics, TaskMetrics};
pub use replay::{read_replay, replay_dump, ReplayHeader, ReplayRecord, ReplaySummary};
pub use training::{run_training, run_training_with, Control, IterationRecord, TrainingSummary};

use std::path::Path;

/// Loads a checkpoint and checks that its network fits `config`.
pub fn load_policy(path: &Path, config: &RunConfig) -> Result<swarm_core::PolicyParams> {
    let checkpoint = Checkpoint::load(path)?;
    checkpoint.check_spec(&config.spec()?)?;
    Ok(checkpoint.params)
}
