//! Multi-agent TRPO with a shared policy and a shared global reward.
//!
//! Transitions from all agents are pooled and treated as if one agent had
//! produced them; the agent index only matters for grouping trajectories
//! when computing returns.

mod rollout;

use std::ops::Range;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, conjugate_gradient};
use crate::policy::{
    kl_divergence, kl_head_gradient, latest_observation, log_prob, log_prob_head_gradient, BatchCache,
    GaussianActionDistribution, HeadGradient, PolicyParams, PolicySpec,
};
use crate::scalar::{all_finite, axpy, dot, norm, Scalar};

pub use rollout::{
    collect_rollouts, derive_seed, episode_seed, run_episode, ActionMode, EnvConfig, EpisodeSummary, StepView,
};

/// Ridge added to the baseline normal equations.
pub const BASELINE_RIDGE: f64 = 1e-6;
/// Step used for the symmetric finite difference of KL gradients.
pub const FVP_EPSILON: f64 = 1e-5;
/// Batch items per parallel work unit; partial sums are merged in order.
const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "S: crate::scalar::Scalar + serde::Deserialize<'de>"))]
pub struct TrpoConfig<S> {
    /// Trust-region radius on the mean KL divergence.
    pub kl_bound: S,
    pub discount: S,
    pub cg_iterations: usize,
    pub cg_damping: S,
    pub cg_tolerance: S,
    pub backtrack_ratio: S,
    pub max_backtracks: usize,
    pub episodes_per_iteration: usize,
    pub iterations: usize,
    pub episode_length: usize,
    /// Every `fvp_subsample`-th transition enters Fisher-vector products.
    pub fvp_subsample: usize,
}

impl<S: Scalar> Default for TrpoConfig<S> {
    fn default() -> Self {
        Self {
            kl_bound: S::lit(0.01),
            discount: S::lit(0.99),
            cg_iterations: 10,
            cg_damping: S::lit(0.1),
            cg_tolerance: S::lit(1e-10),
            backtrack_ratio: S::lit(0.8),
            max_backtracks: 15,
            episodes_per_iteration: 8,
            iterations: 300,
            episode_length: 500,
            fvp_subsample: 1,
        }
    }
}

impl<S: Scalar> TrpoConfig<S> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("trpo.{m}")));
        if !(self.kl_bound > S::zero()) {
            return bad("kl_bound must be > 0");
        }
        if !(self.discount > S::zero() && self.discount <= S::one()) {
            return bad("discount must lie in (0, 1]");
        }
        if !(self.cg_damping > S::zero()) {
            return bad("cg_damping must be > 0");
        }
        if !(self.backtrack_ratio > S::zero() && self.backtrack_ratio < S::one()) {
            return bad("backtrack_ratio must lie in (0, 1)");
        }
        if self.episodes_per_iteration == 0 || self.episode_length == 0 || self.fvp_subsample == 0 {
            return bad("episodes_per_iteration, episode_length and fvp_subsample must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    /// Flat history window the action was sampled from.
    pub history: Vec<S>,
    /// Sampled action before clamping.
    pub action: Vec<S>,
    /// Global reward, identical for every agent at this step.
    pub reward: S,
    pub episode_id: usize,
    pub agent_id: usize,
    pub t: usize,
}

/// Pooled transitions, stored contiguously per `(episode, agent)` trajectory
/// in time order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryBatch<S> {
    pub transitions: Vec<Transition<S>>,
    pub trajectories: Vec<Range<usize>>,
    pub returns: Vec<S>,
    pub advantages: Vec<S>,
    /// Undiscounted sum of global rewards for each episode.
    pub episode_returns: Vec<S>,
    /// Nominal episode length, used to scale the baseline's time features.
    pub horizon: usize,
}

impl<S: Scalar> TrajectoryBatch<S> {
    /// Groups transitions into trajectories by `(episode_id, agent_id)`,
    /// ordering them by episode, agent, then step.
    pub fn from_transitions(mut transitions: Vec<Transition<S>>, horizon: usize) -> Self {
        transitions.sort_by_key(|tr| (tr.episode_id, tr.agent_id, tr.t));
        let mut trajectories = Vec::new();
        let mut start = 0;
        for i in 1..=transitions.len() {
            let boundary = i == transitions.len()
                || (transitions[i].episode_id, transitions[i].agent_id)
                    != (transitions[start].episode_id, transitions[start].agent_id);
            if boundary {
                trajectories.push(start..i);
                start = i;
            }
        }
        let mut batch = Self {
            transitions,
            trajectories,
            returns: Vec::new(),
            advantages: Vec::new(),
            episode_returns: Vec::new(),
            horizon,
        };
        batch.episode_returns = batch.undiscounted_episode_returns();
        batch
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Sum of global rewards per episode, counting each step once (taken
    /// from the lowest-index agent's trajectory).
    fn undiscounted_episode_returns(&self) -> Vec<S> {
        let mut out: Vec<(usize, S)> = Vec::new();
        for r in &self.trajectories {
            let ep = self.transitions[r.start].episode_id;
            if out.last().is_none_or(|(e, _)| *e != ep) {
                out.push((ep, self.transitions[r.clone()].iter().map(|t| t.reward).sum()));
            }
        }
        out.into_iter().map(|(_, v)| v).collect()
    }
}

/// Fills `batch.returns` with `G_t = r_t + γ G_{t+1}` per trajectory.
pub fn compute_returns<S: Scalar>(batch: &mut TrajectoryBatch<S>, discount: S) {
    batch.returns = vec![S::zero(); batch.transitions.len()];
    for r in &batch.trajectories {
        let mut acc = S::zero();
        for i in r.clone().rev() {
            acc = batch.transitions[i].reward + discount * acc;
            batch.returns[i] = acc;
        }
    }
}

/// Linear value baseline on `[latest observation, t/T, (t/T)², 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel<S> {
    pub weights: Vec<S>,
    slot_len: usize,
    action_dim: usize,
    horizon: usize,
}

impl<S: Scalar> BaselineModel<S> {
    pub fn features(&self, transition: &Transition<S>) -> Vec<S> {
        baseline_features(transition, self.slot_len, self.action_dim, self.horizon)
    }

    pub fn predict(&self, transition: &Transition<S>) -> S {
        dot(&self.weights, &self.features(transition))
    }

    /// A model that always predicts zero.
    pub fn zero(spec: &PolicySpec, horizon: usize) -> Self {
        Self {
            weights: vec![S::zero(); spec.obs_dim + 3],
            slot_len: spec.slot_input(),
            action_dim: spec.action_dim,
            horizon,
        }
    }
}

fn baseline_features<S: Scalar>(tr: &Transition<S>, slot_len: usize, action_dim: usize, horizon: usize) -> Vec<S> {
    let obs = latest_observation(&tr.history, slot_len, action_dim);
    let tt = S::from_usize_lossy(tr.t) / S::from_usize_lossy(horizon.max(1));
    let mut f = Vec::with_capacity(obs.len() + 3);
    f.extend_from_slice(obs);
    f.extend([tt, tt * tt, S::one()]);
    f
}

/// Least-squares fit of the returns with a small ridge term.
pub fn fit_baseline<S: Scalar>(batch: &TrajectoryBatch<S>, spec: &PolicySpec) -> Result<BaselineModel<S>> {
    if batch.is_empty() || batch.returns.len() != batch.len() {
        return Err(Error::InvalidConfig("baseline fit needs a non-empty batch with returns".into()));
    }
    let mut model = BaselineModel::zero(spec, batch.horizon);
    let dim = model.weights.len();
    let mut gram = vec![S::zero(); dim * dim];
    let mut rhs = vec![S::zero(); dim];
    for (tr, &ret) in batch.transitions.iter().zip(&batch.returns) {
        let f = model.features(tr);
        for i in 0..dim {
            if f[i] == S::zero() {
                continue;
            }
            rhs[i] += f[i] * ret;
            axpy(f[i], &f, &mut gram[i * dim..(i + 1) * dim]);
        }
    }
    let ridge = S::lit(BASELINE_RIDGE);
    for i in 0..dim {
        gram[i * dim + i] += ridge;
    }
    model.weights = cholesky_solve(&gram, &rhs).ok_or(Error::NonFinite("baseline normal equations"))?;
    Ok(model)
}

/// Whether advantage normalization had to be skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvantageNormalization {
    Normalized,
    Degenerate,
}

/// `advantage = return - baseline`, then standardized to mean 0 and
/// (population) standard deviation 1 across the batch.
pub fn estimate_advantages<S: Scalar>(batch: &mut TrajectoryBatch<S>, baseline: &BaselineModel<S>) -> AdvantageNormalization {
    let raw: Vec<S> = batch
        .transitions
        .iter()
        .zip(&batch.returns)
        .map(|(tr, &ret)| ret - baseline.predict(tr))
        .collect();
    let scale = batch.returns.iter().fold(S::zero(), |m, r| m.max(r.abs()));
    let (normalized, outcome) = normalize(raw, scale);
    batch.advantages = normalized;
    outcome
}

/// Relative spread below which advantages count as numerical noise.
const DEGENERATE_SPREAD: f64 = 1e-5;

/// Standardizes `values`, unless their spread is negligible next to
/// `reference_scale` and the values themselves.
pub(crate) fn normalize<S: Scalar>(mut values: Vec<S>, reference_scale: S) -> (Vec<S>, AdvantageNormalization) {
    if values.is_empty() {
        return (values, AdvantageNormalization::Degenerate);
    }
    let n = S::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<S>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
    let std = var.sqrt();
    let scale = values.iter().fold(reference_scale.abs(), |m, v| m.max(v.abs()));
    if !(std > S::lit(DEGENERATE_SPREAD) * scale.max(S::min_positive_value())) || !std.is_finite() {
        warn!("degenerate advantage batch (std {std}); skipping normalization");
        return (values, AdvantageNormalization::Degenerate);
    }
    for v in &mut values {
        *v = (*v - mean) / std;
    }
    (values, AdvantageNormalization::Normalized)
}

/// Action distributions and log-likelihoods under the pre-update policy.
#[derive(Debug, Clone)]
pub struct PolicySnapshot<S> {
    pub dists: Vec<GaussianActionDistribution<S>>,
    pub log_probs: Vec<S>,
}

impl<S: Scalar> PolicySnapshot<S> {
    pub fn capture(params: &PolicyParams<S>, batch: &TrajectoryBatch<S>) -> Self {
        let dists: Vec<_> = batch
            .transitions
            .par_chunks(CHUNK)
            .flat_map_iter(|chunk| {
                let mut cache = BatchCache::default();
                params.forward_batch(chunk.iter().map(|tr| tr.history.as_slice()), &mut cache);
                (0..chunk.len()).map(|n| params.dist_at(&cache, n)).collect::<Vec<_>>()
            })
            .collect();
        let log_probs = dists
            .iter()
            .zip(&batch.transitions)
            .map(|(d, tr)| log_prob(d, &tr.action))
            .collect();
        Self { dists, log_probs }
    }
}

/// Sums fixed-size chunk results in index order so the total does not depend
/// on the thread count.
fn ordered_sum<T: Send>(items: &[usize], f: impl Fn(&[usize]) -> T + Sync, add: impl Fn(&mut T, T)) -> Option<T> {
    let parts: Vec<T> = items.par_chunks(CHUNK).map(&f).collect();
    let mut it = parts.into_iter();
    let mut acc = it.next()?;
    for p in it {
        add(&mut acc, p);
    }
    Some(acc)
}

fn forward_chunk<S: Scalar>(params: &PolicyParams<S>, batch: &TrajectoryBatch<S>, chunk: &[usize]) -> BatchCache<S> {
    let mut cache = BatchCache::default();
    params.forward_batch(chunk.iter().map(|&i| batch.transitions[i].history.as_slice()), &mut cache);
    cache
}

#[allow(clippy::ptr_arg)]
fn add_vec<S: Scalar>(acc: &mut Vec<S>, other: Vec<S>) {
    axpy(S::one(), &other, acc);
}

/// Surrogate value and mean KL at `params` over the whole batch.
fn surrogate_and_kl<S: Scalar>(params: &PolicyParams<S>, snap: &PolicySnapshot<S>, batch: &TrajectoryBatch<S>) -> (S, S) {
    let idx: Vec<usize> = (0..batch.len()).collect();
    let (surr, kl) = ordered_sum(
        &idx,
        |chunk| {
            let cache = forward_chunk(params, batch, chunk);
            let mut s = S::zero();
            let mut k = S::zero();
            for (n, &i) in chunk.iter().enumerate() {
                let tr = &batch.transitions[i];
                let d = params.dist_at(&cache, n);
                s += (log_prob(&d, &tr.action) - snap.log_probs[i]).exp() * batch.advantages[i];
                k += kl_divergence(&snap.dists[i], &d);
            }
            (s, k)
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    )
    .unwrap_or((S::zero(), S::zero()));
    let n = S::from_usize_lossy(batch.len().max(1));
    (surr / n, kl / n)
}

/// Mean over the batch of `exp(logp_θ - logp_old) · Â`, to be maximized.
pub fn surrogate_loss<S: Scalar>(params: &PolicyParams<S>, params_old: &PolicyParams<S>, batch: &TrajectoryBatch<S>) -> S {
    let snap = PolicySnapshot::capture(params_old, batch);
    surrogate_and_kl(params, &snap, batch).0
}

/// Mean `KL(old ‖ θ)` over the batch.
pub fn mean_kl<S: Scalar>(params: &PolicyParams<S>, params_old: &PolicyParams<S>, batch: &TrajectoryBatch<S>) -> S {
    let snap = PolicySnapshot::capture(params_old, batch);
    surrogate_and_kl(params, &snap, batch).1
}

/// Gradient of the surrogate at `params`.
pub fn surrogate_gradient<S: Scalar>(params: &PolicyParams<S>, snap: &PolicySnapshot<S>, batch: &TrajectoryBatch<S>) -> Vec<S> {
    let idx: Vec<usize> = (0..batch.len()).collect();
    let n = S::from_usize_lossy(batch.len().max(1));
    let mut g = ordered_sum(
        &idx,
        |chunk| {
            let mut grad = vec![S::zero(); params.values.len()];
            let cache = forward_chunk(params, batch, chunk);
            let heads: Vec<_> = chunk
                .iter()
                .enumerate()
                .map(|(n, &i)| {
                    let tr = &batch.transitions[i];
                    let d = params.dist_at(&cache, n);
                    let ratio = (log_prob(&d, &tr.action) - snap.log_probs[i]).exp();
                    log_prob_head_gradient(&d, &tr.action).scale(ratio * batch.advantages[i])
                })
                .collect();
            params.backward_batch(&cache, &heads, &mut grad);
            grad
        },
        add_vec,
    )
    .unwrap_or_else(|| vec![S::zero(); params.values.len()]);
    g.iter_mut().for_each(|v| *v /= n);
    g
}

/// Gradient of the mean KL from the snapshot to `params` over `indices`.
pub fn kl_gradient<S: Scalar>(
    params: &PolicyParams<S>,
    snap: &PolicySnapshot<S>,
    batch: &TrajectoryBatch<S>,
    indices: &[usize],
) -> Vec<S> {
    let n = S::from_usize_lossy(indices.len().max(1));
    let mut g = ordered_sum(
        indices,
        |chunk| {
            let mut grad = vec![S::zero(); params.values.len()];
            let cache = forward_chunk(params, batch, chunk);
            let heads: Vec<HeadGradient<S>> = chunk
                .iter()
                .enumerate()
                .map(|(n, &i)| kl_head_gradient(&snap.dists[i], &params.dist_at(&cache, n)))
                .collect();
            params.backward_batch(&cache, &heads, &mut grad);
            grad
        },
        add_vec,
    )
    .unwrap_or_else(|| vec![S::zero(); params.values.len()]);
    g.iter_mut().for_each(|v| *v /= n);
    g
}

fn fd_epsilon<S: Scalar>() -> S {
    S::lit(FVP_EPSILON).max(S::epsilon().cbrt())
}

/// `H v + damping · v`, with `H` the Hessian of the mean KL at the snapshot
/// parameters, via `(∇KL(θ+εv) - ∇KL(θ-εv)) / 2ε`.
pub fn fisher_vector_product<S: Scalar>(
    params: &PolicyParams<S>,
    snap: &PolicySnapshot<S>,
    batch: &TrajectoryBatch<S>,
    indices: &[usize],
    v: &[S],
    damping: S,
) -> Result<Vec<S>> {
    let eps = fd_epsilon::<S>();
    let shifted = |sign: S| {
        let mut p = params.clone();
        axpy(sign * eps, v, &mut p.values);
        kl_gradient(&p, snap, batch, indices)
    };
    let plus = shifted(S::one());
    let minus = shifted(-S::one());
    let two_eps = eps + eps;
    let out: Vec<S> = plus
        .iter()
        .zip(&minus)
        .zip(v)
        .map(|((a, b), vi)| (*a - *b) / two_eps + damping * *vi)
        .collect();
    if !all_finite(&out) {
        return Err(Error::NonFinite("fisher-vector product"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateOutcome {
    Accepted,
    /// Gradient was zero; nothing to do.
    ZeroGradient,
    /// No backtracking candidate improved the surrogate within the KL bound.
    LineSearchFailed,
    NonFinite(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats<S> {
    pub surrogate_before: S,
    pub surrogate_after: S,
    pub kl: S,
    pub step_norm: S,
    pub backtracks: usize,
    pub outcome: UpdateOutcome,
}

impl<S: Scalar> UpdateStats<S> {
    fn noop(surrogate: S, outcome: UpdateOutcome) -> Self {
        Self {
            surrogate_before: surrogate,
            surrogate_after: surrogate,
            kl: S::zero(),
            step_norm: S::zero(),
            backtracks: 0,
            outcome,
        }
    }

    pub fn accepted(&self) -> bool {
        self.outcome == UpdateOutcome::Accepted
    }

    pub fn improvement(&self) -> S {
        self.surrogate_after - self.surrogate_before
    }
}

/// One KL-constrained natural-gradient step with backtracking line search.
/// Returns the input parameters unchanged when no candidate is accepted.
pub fn trpo_update<S: Scalar>(
    params: &PolicyParams<S>,
    batch: &TrajectoryBatch<S>,
    config: &TrpoConfig<S>,
) -> (PolicyParams<S>, UpdateStats<S>) {
    if batch.is_empty() || batch.advantages.len() != batch.len() {
        return (params.clone(), UpdateStats::noop(S::zero(), UpdateOutcome::ZeroGradient));
    }
    let snap = PolicySnapshot::capture(params, batch);
    let (surr_before, _) = surrogate_and_kl(params, &snap, batch);
    let nonfinite = |what: &str| {
        warn!("trpo update skipped: non-finite {what}");
        (params.clone(), UpdateStats::noop(surr_before, UpdateOutcome::NonFinite(what.to_string())))
    };
    if !surr_before.is_finite() {
        return nonfinite("surrogate");
    }
    let g = surrogate_gradient(params, &snap, batch);
    if !all_finite(&g) {
        return nonfinite("gradient");
    }
    if g.iter().all(|&v| v == S::zero()) {
        return (params.clone(), UpdateStats::noop(surr_before, UpdateOutcome::ZeroGradient));
    }
    let fvp_idx: Vec<usize> = (0..batch.len()).step_by(config.fvp_subsample.max(1)).collect();
    let fvp = |v: &[S]| fisher_vector_product(params, &snap, batch, &fvp_idx, v, config.cg_damping);
    let dir = match conjugate_gradient(&fvp, &g, config.cg_iterations, config.cg_tolerance) {
        Ok(d) => d,
        Err(_) => return nonfinite("conjugate gradient"),
    };
    let shs = match fvp(&dir) {
        Ok(hs) => dot(&dir, &hs),
        Err(_) => return nonfinite("curvature"),
    };
    if !(shs.is_finite() && shs > S::zero()) {
        return nonfinite("curvature");
    }
    let scale = ((config.kl_bound + config.kl_bound) / shs).sqrt();
    let full_step: Vec<S> = dir.iter().map(|&d| d * scale).collect();

    let mut frac = S::one();
    for k in 0..=config.max_backtracks {
        let mut cand = params.clone();
        axpy(frac, &full_step, &mut cand.values);
        let (surr, kl) = surrogate_and_kl(&cand, &snap, batch);
        debug!("line search {k}: surrogate {surr} kl {kl}");
        if surr.is_finite() && kl.is_finite() && surr - surr_before > S::zero() && kl <= config.kl_bound {
            let stats = UpdateStats {
                surrogate_before: surr_before,
                surrogate_after: surr,
                kl,
                step_norm: norm(&full_step) * frac,
                backtracks: k,
                outcome: UpdateOutcome::Accepted,
            };
            return (cand, stats);
        }
        frac *= config.backtrack_ratio;
    }
    let mut stats = UpdateStats::noop(surr_before, UpdateOutcome::LineSearchFailed);
    stats.backtracks = config.max_backtracks;
    (params.clone(), stats)
}

/// Result of one collect, fit and update cycle.
#[derive(Debug, Clone)]
pub struct IterationOutcome<S> {
    pub params: PolicyParams<S>,
    pub stats: UpdateStats<S>,
    pub episode_returns: Vec<S>,
    pub normalization: AdvantageNormalization,
}

/// Samples `config.episodes_per_iteration` episodes with `params`, fits the
/// baseline and takes one trust-region step.
pub fn train_iteration<S: Scalar>(
    params: &PolicyParams<S>,
    env: &EnvConfig<S>,
    config: &TrpoConfig<S>,
    rollout_seed: u64,
) -> Result<IterationOutcome<S>> {
    let mut batch = collect_rollouts(params, env, config.episodes_per_iteration, rollout_seed)?;
    compute_returns(&mut batch, config.discount);
    let baseline = fit_baseline(&batch, &params.spec)?;
    let normalization = estimate_advantages(&mut batch, &baseline);
    let (next, stats) = trpo_update(params, &batch, config);
    Ok(IterationOutcome {
        params: next,
        stats,
        episode_returns: batch.episode_returns,
        normalization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(reward: f64, episode_id: usize, agent_id: usize, t: usize) -> Transition<f64> {
        Transition {
            history: vec![0.0; 4],
            action: vec![0.0, 0.0],
            reward,
            episode_id,
            agent_id,
            t,
        }
    }

    #[test]
    fn returns_recursion() {
        let mut b = TrajectoryBatch::from_transitions(vec![tr(1.0, 0, 0, 0), tr(1.0, 0, 0, 1), tr(1.0, 0, 0, 2)], 3);
        compute_returns(&mut b, 1.0);
        assert_eq!(b.returns, vec![3.0, 2.0, 1.0]);

        let mut b = TrajectoryBatch::from_transitions(vec![tr(1.0, 0, 0, 0), tr(0.0, 0, 0, 1), tr(0.0, 0, 0, 2)], 3);
        compute_returns(&mut b, 0.5);
        assert_eq!(b.returns, vec![1.0, 0.0, 0.0]);

        let mut b = TrajectoryBatch::from_transitions(vec![tr(0.0, 0, 0, 0), tr(0.0, 0, 0, 1), tr(1.0, 0, 0, 2)], 3);
        compute_returns(&mut b, 0.5);
        assert_eq!(b.returns, vec![0.25, 0.5, 1.0]);
    }

    #[test]
    fn grouping_orders_and_splits_trajectories() {
        let b = TrajectoryBatch::from_transitions(
            vec![tr(2.0, 1, 0, 0), tr(1.0, 0, 1, 1), tr(1.0, 0, 0, 1), tr(1.0, 0, 1, 0), tr(1.0, 0, 0, 0)],
            2,
        );
        assert_eq!(b.trajectories, vec![0..2, 2..4, 4..5]);
        assert_eq!(b.episode_returns, vec![2.0, 2.0]);
        assert_eq!((b.transitions[1].agent_id, b.transitions[1].t), (0, 1));
    }

    #[test]
    fn normalization_moments() {
        let (v, o) = normalize(vec![1.0, 2.0, 3.0, 10.0], 10.0);
        assert_eq!(o, AdvantageNormalization::Normalized);
        let mean: f64 = v.iter().sum::<f64>() / 4.0;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!(mean.abs() < 1e-12 && (std - 1.0).abs() < 1e-12);
        let (v, o) = normalize(vec![0.0; 5], 0.0);
        assert_eq!(o, AdvantageNormalization::Degenerate);
        assert_eq!(v, vec![0.0; 5]);
        let (_, o) = normalize(vec![1e-9, -1e-9], 3.0);
        assert_eq!(o, AdvantageNormalization::Degenerate);
    }

    #[test]
    fn config_validation() {
        assert!(TrpoConfig::<f64>::default().validate().is_ok());
        let c = TrpoConfig::<f64> {
            backtrack_ratio: 1.0,
            ..TrpoConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrpoConfig::<f64> {
            kl_bound: 0.0,
            ..TrpoConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
