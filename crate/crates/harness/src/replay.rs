//! Trajectory dumps as JSON lines.
//!
//! Line 1 is a [`ReplayHeader`]. Every following line is a [`ReplayRecord`]
//! for one agent at one control step, ordered by step and then agent, so a
//! full episode has `episode_length · n_agents + 1` lines. Pose fields
//! describe the state the observation was taken in; `next_*` fields and
//! `reward` describe the state after the step.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use swarm_core::trpo::{run_episode, ActionMode};
use swarm_core::{ObservationMode, PolicyParams, TaskSpec};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};

pub const REPLAY_SCHEMA: &str = "swarm-replay";
pub const REPLAY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayHeader {
    pub schema: String,
    pub version: u32,
    pub task: TaskSpec,
    pub mode: ObservationMode,
    pub n_agents: usize,
    pub obs_dim: usize,
    pub episode_length: usize,
    pub seed: u64,
    pub pois: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub t: usize,
    pub agent: usize,
    pub x: f64,
    pub y: f64,
    pub orientation: f64,
    pub observation: Vec<f64>,
    /// Policy output before clamping.
    pub action: [f64; 2],
    /// Motor command actually applied, clamped to `[-1, 1]`.
    pub command: [f64; 2],
    pub next_x: f64,
    pub next_y: f64,
    pub next_orientation: f64,
    /// Global reward of the post-step state.
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySummary {
    pub lines: usize,
    pub total_reward: f64,
}

/// Runs one mean-action episode seeded with `seed` and writes it to `path`.
pub fn replay_dump(params: &PolicyParams, config: &RunConfig, seed: u64, path: &Path) -> Result<ReplaySummary> {
    config.validate()?;
    let env = config.env();
    let io = |e| HarnessError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let mut lines = 0usize;
    let mut failure: Option<std::io::Error> = None;
    let summary = run_episode(params, &env, seed, ActionMode::Mean, |step| {
        let mut emit = |value: String| {
            if failure.is_none() {
                if let Err(e) = writeln!(out, "{value}") {
                    failure = Some(e);
                }
            }
            lines += 1;
        };
        if step.t == 0 {
            let header = ReplayHeader {
                schema: REPLAY_SCHEMA.into(),
                version: REPLAY_VERSION,
                task: env.task.clone(),
                mode: env.protocol.mode,
                n_agents: step.before.n_agents(),
                obs_dim: step.observations.first().map_or(0, |o| o.len()),
                episode_length: env.episode_length,
                seed,
                pois: step.before.pois.iter().map(|p| [p.x, p.y]).collect(),
            };
            emit(serde_json::to_string(&header).expect("header serializes"));
        }
        for (i, (before, after)) in step.before.agents.iter().zip(&step.after.agents).enumerate() {
            let a = &step.actions[i];
            let record = ReplayRecord {
                t: step.t,
                agent: i,
                x: before.position.x,
                y: before.position.y,
                orientation: before.orientation,
                observation: step.observations[i].clone(),
                action: [a[0], a[1]],
                command: [a[0].clamp(-1.0, 1.0), a[1].clamp(-1.0, 1.0)],
                next_x: after.position.x,
                next_y: after.position.y,
                next_orientation: after.orientation,
                reward: step.reward,
            };
            emit(serde_json::to_string(&record).expect("record serializes"));
        }
        Ok(())
    })?;
    if let Some(e) = failure {
        return Err(io(e));
    }
    out.flush().map_err(io)?;
    Ok(ReplaySummary {
        lines,
        total_reward: summary.total_reward(),
    })
}

pub fn read_replay(path: &Path) -> Result<(ReplayHeader, Vec<ReplayRecord>)> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |n: usize, e: &dyn std::fmt::Display| HarnessError::Config(format!("{}:{n}: {e}", path.display()));
    let first = lines
        .next()
        .ok_or_else(|| bad(1, &"empty replay file"))?
        .map_err(|e| HarnessError::io(path, e))?;
    let header: ReplayHeader = serde_json::from_str(&first).map_err(|e| bad(1, &e))?;
    if header.schema != REPLAY_SCHEMA || header.version != REPLAY_VERSION {
        return Err(bad(1, &format!("unsupported replay {} v{}", header.schema, header.version)));
    }
    let records = lines
        .enumerate()
        .map(|(k, line)| {
            let line = line.map_err(|e| HarnessError::io(path, e))?;
            serde_json::from_str(&line).map_err(|e| bad(k + 2, &e))
        })
        .collect::<Result<Vec<ReplayRecord>>>()?;
    Ok((header, records))
}
