use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Transition, TrajectoryBatch};
use crate::error::{check_dim, Error, Result};
use crate::policy::{BatchCache, GaussianActionDistribution, HistoryWindow, PolicyParams};
use crate::protocols::{assemble_observation, observation_dim, ObservationMode, PathTracker, ProtocolConfig};
use crate::scalar::Scalar;
use crate::sim::{reset_world, step_world, MotorAction, SimConfig, WorldState};
use crate::tasks::TaskSpec;

/// Everything needed to simulate one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: crate::scalar::Scalar + serde::Deserialize<'de>"))]
pub struct EnvConfig<S> {
    pub sim: SimConfig<S>,
    pub protocol: ProtocolConfig<S>,
    pub task: TaskSpec<S>,
    pub episode_length: usize,
}

impl<S: Scalar> EnvConfig<S> {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.task.validate()?;
        self.protocol.validate(&self.sim, &self.task)?;
        if self.episode_length == 0 {
            return Err(Error::InvalidConfig("episode_length must be >= 1".into()));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> Result<usize> {
        observation_dim(&self.protocol, &self.task)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Sample from the policy distribution (training).
    Sample,
    /// Use the distribution mean (evaluation).
    Mean,
}

/// What happened at one control step, handed to episode observers.
#[derive(Debug)]
pub struct StepView<'a, S> {
    pub t: usize,
    pub before: &'a WorldState<S>,
    pub after: &'a WorldState<S>,
    pub observations: &'a [Vec<S>],
    pub histories: &'a [HistoryWindow<S>],
    pub dists: &'a [GaussianActionDistribution<S>],
    /// Actions before clamping.
    pub actions: &'a [Vec<S>],
    /// Global reward of the post-step state.
    pub reward: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary<S> {
    pub rewards: Vec<S>,
    pub final_world: WorldState<S>,
}

impl<S: Scalar> EpisodeSummary<S> {
    pub fn total_reward(&self) -> S {
        self.rewards.iter().copied().sum()
    }
}

/// SplitMix64 finalizer over `(seed, stream)`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of episode `episode` within a collection seeded by `master_seed`.
pub fn episode_seed(master_seed: u64, episode: usize) -> u64 {
    derive_seed(master_seed, episode as u64)
}

/// Runs one episode with the shared policy. `observer` sees every step.
pub fn run_episode<S: Scalar>(
    policy: &PolicyParams<S>,
    env: &EnvConfig<S>,
    seed: u64,
    mode: ActionMode,
    mut observer: impl FnMut(&StepView<'_, S>) -> Result<()>,
) -> Result<EpisodeSummary<S>> {
    let spec = &policy.spec;
    check_dim("policy observation size", env.obs_dim()?, spec.obs_dim)?;
    let mut world = reset_world(&env.sim, &env.task, derive_seed(seed, 0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let m = world.n_agents();
    let mut tracker = PathTracker::new(env.task.n_pois(), m);
    let uses_paths = env.protocol.mode == ObservationMode::TwoDSp;
    let mut histories = vec![HistoryWindow::new(spec); m];
    let mut prev_actions = vec![vec![S::zero(); spec.action_dim]; m];
    let mut rewards = Vec::with_capacity(env.episode_length);
    let mut cache = BatchCache::default();
    for t in 0..env.episode_length {
        if uses_paths {
            tracker.advance(&world, &env.protocol)?;
        }
        let observations = (0..m)
            .map(|i| {
                assemble_observation(&world, i, &tracker.estimates, &env.protocol, &env.sim, &env.task)
                    .map(|o| o.features)
            })
            .collect::<Result<Vec<_>>>()?;
        for ((h, a), o) in histories.iter_mut().zip(&prev_actions).zip(&observations) {
            h.push(a, o)?;
        }
        policy.forward_batch(histories.iter().map(|h| h.as_slice()), &mut cache);
        let dists: Vec<_> = (0..m).map(|i| policy.dist_at(&cache, i)).collect();
        let actions: Vec<Vec<S>> = dists
            .iter()
            .map(|d| match mode {
                ActionMode::Sample => d.sample(&mut rng),
                ActionMode::Mean => d.mean.clone(),
            })
            .collect();
        if actions.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("policy action"));
        }
        let commands: Vec<MotorAction<S>> = actions.iter().map(|a| MotorAction::from_slice(a).clamped()).collect();
        let next = step_world(&world, &commands, &env.sim)?;
        let reward = env.task.reward(&next);
        observer(&StepView {
            t,
            before: &world,
            after: &next,
            observations: &observations,
            histories: &histories,
            dists: &dists,
            actions: &actions,
            reward,
        })?;
        rewards.push(reward);
        for (prev, cmd) in prev_actions.iter_mut().zip(&commands) {
            prev[0] = cmd.left_force;
            prev[1] = cmd.right_force;
        }
        world = next;
    }
    Ok(EpisodeSummary {
        rewards,
        final_world: world,
    })
}

fn episode_transitions<S: Scalar>(
    policy: &PolicyParams<S>,
    env: &EnvConfig<S>,
    seed: u64,
    episode_id: usize,
) -> Result<Vec<Transition<S>>> {
    let m = env.sim.n_agents;
    let mut per_agent: Vec<Vec<Transition<S>>> = (0..m).map(|_| Vec::with_capacity(env.episode_length)).collect();
    run_episode(policy, env, seed, ActionMode::Sample, |step| {
        for (agent_id, traj) in per_agent.iter_mut().enumerate() {
            traj.push(Transition {
                history: step.histories[agent_id].as_slice().to_vec(),
                action: step.actions[agent_id].clone(),
                reward: step.reward,
                episode_id,
                agent_id,
                t: step.t,
            });
        }
        Ok(())
    })?;
    Ok(per_agent.into_iter().flatten().collect())
}

/// Samples `episodes` episodes with the shared policy. Episode `e` is seeded
/// from `(master_seed, e)`, so episodes run in parallel yet reproducibly.
pub fn collect_rollouts<S: Scalar>(
    policy: &PolicyParams<S>,
    env: &EnvConfig<S>,
    episodes: usize,
    master_seed: u64,
) -> Result<TrajectoryBatch<S>> {
    let per_episode = (0..episodes)
        .into_par_iter()
        .map(|e| episode_transitions(policy, env, episode_seed(master_seed, e), e))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryBatch::from_transitions(
        per_episode.into_iter().flatten().collect(),
        env.episode_length,
    ))
}
