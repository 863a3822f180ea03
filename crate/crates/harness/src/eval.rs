use serde::Serialize;
use swarm_core::tasks::{edge_counts, shortest_link_length, CommGraph};
use swarm_core::trpo::{episode_seed, run_episode, ActionMode};
use swarm_core::{PolicyParams, TaskSpec};

use crate::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum TaskMetrics {
    Edge {
        /// Agent pairs inside the reward interval, averaged over all steps.
        mean_active_edges: f64,
        /// Agent pairs inside the penalty interval, averaged over all steps.
        mean_penalized_pairs: f64,
    },
    Link {
        /// Fraction of steps whose post-step state links the two points.
        established_fraction: f64,
        mean_link_reward: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub episodes: usize,
    pub seed: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub episode_returns: Vec<f64>,
    pub metrics: TaskMetrics,
}

/// Runs `n_episodes` episodes with mean actions. Episode `e` uses the same
/// seed derivation as training rollouts, keyed by `seed`.
pub fn evaluate(params: &PolicyParams, config: &RunConfig, n_episodes: usize, seed: u64) -> Result<EvalMetrics> {
    config.validate()?;
    let env = config.env();
    let mut returns = Vec::with_capacity(n_episodes);
    let (mut steps, mut first, mut second) = (0usize, 0.0f64, 0.0f64);
    for e in 0..n_episodes {
        let summary = run_episode(params, &env, episode_seed(seed, e), ActionMode::Mean, |step| {
            steps += 1;
            match &env.task {
                TaskSpec::Edge(p) => {
                    let c = edge_counts(step.after, p);
                    first += c.active as f64;
                    second += c.penalized as f64;
                }
                TaskSpec::Link(p) => {
                    let linked = CommGraph::from_world(step.after, p.link_radius)
                        .and_then(|g| shortest_link_length(&g))
                        .is_some();
                    first += if linked { 1.0 } else { 0.0 };
                    second += step.reward;
                }
            }
            Ok(())
        })?;
        returns.push(summary.total_reward());
    }
    let n = returns.len().max(1) as f64;
    let mean_return = returns.iter().sum::<f64>() / n;
    let std_return = (returns.iter().map(|r| (r - mean_return).powi(2)).sum::<f64>() / n).sqrt();
    let per_step = |x: f64| x / steps.max(1) as f64;
    let metrics = match env.task {
        TaskSpec::Edge(_) => TaskMetrics::Edge {
            mean_active_edges: per_step(first),
            mean_penalized_pairs: per_step(second),
        },
        TaskSpec::Link(_) => TaskMetrics::Link {
            established_fraction: per_step(first),
            mean_link_reward: per_step(second),
        },
    };
    Ok(EvalMetrics {
        episodes: n_episodes,
        seed,
        mean_return,
        std_return,
        episode_returns: returns,
        metrics,
    })
}
