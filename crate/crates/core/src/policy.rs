//! Shared Gaussian policy over truncated action-observation histories.
//!
//! Each history slot `(a_{k-1}, o_k)` goes through the same two-layer slot
//! network; the slot embeddings are concatenated oldest-first and fed to a
//! trunk layer and a linear mean head. The standard deviation is a learned,
//! state-independent vector.
//!
//! Parameter layout (row-major weights, `[out][in]`):
//! `W1 b1 W2 b2` (slot network), `W3 b3` (trunk), `W4 b4` (mean head), `log_std`.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{gemm, MatRef};
use crate::scalar::{axpy, Scalar};

/// Initial value of every `log_std` entry: `ln(0.5)`.
pub const INITIAL_LOG_STD: f64 = -std::f64::consts::LN_2;
/// Extra scale on the mean head's initial weights so initial means start near 0.
pub const OUTPUT_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(S::zero()),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output<S: Scalar>(self, h: S) -> S {
        match self {
            Activation::Tanh => S::one() - h * h,
            Activation::Relu => {
                if h > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicySpec {
    pub history_length: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub slot_hidden1: usize,
    pub slot_hidden2: usize,
    pub trunk_hidden: usize,
    pub activation: Activation,
}

impl PolicySpec {
    /// Default architecture: 128/16 slot layers, 64 trunk units, tanh, two motor outputs.
    pub fn new(history_length: usize, obs_dim: usize) -> Self {
        Self {
            history_length,
            obs_dim,
            action_dim: 2,
            slot_hidden1: 128,
            slot_hidden2: 16,
            trunk_hidden: 64,
            activation: Activation::Tanh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.history_length,
            self.action_dim,
            self.slot_hidden1,
            self.slot_hidden2,
            self.trunk_hidden,
        ];
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("policy sizes and history length must be >= 1".into()));
        }
        Ok(())
    }

    pub fn slot_input(&self) -> usize {
        self.action_dim + self.obs_dim
    }

    pub fn history_dim(&self) -> usize {
        self.history_length * self.slot_input()
    }

    pub fn layout(&self) -> Layout {
        let mut cursor = 0;
        let mut take = |n: usize| {
            let r = cursor..cursor + n;
            cursor += n;
            r
        };
        let (si, h1, h2, ht, a) = (
            self.slot_input(),
            self.slot_hidden1,
            self.slot_hidden2,
            self.trunk_hidden,
            self.action_dim,
        );
        Layout {
            w1: take(h1 * si),
            b1: take(h1),
            w2: take(h2 * h1),
            b2: take(h2),
            w3: take(ht * self.history_length * h2),
            b3: take(ht),
            w4: take(a * ht),
            b4: take(a),
            log_std: take(a),
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout().log_std.end
    }
}

/// Index ranges of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
    pub w3: Range<usize>,
    pub b3: Range<usize>,
    pub w4: Range<usize>,
    pub b4: Range<usize>,
    pub log_std: Range<usize>,
}

impl Layout {
    pub fn weights(&self) -> [&Range<usize>; 4] {
        [&self.w1, &self.w2, &self.w3, &self.w4]
    }

    pub fn biases(&self) -> [&Range<usize>; 4] {
        [&self.b1, &self.b2, &self.b3, &self.b4]
    }
}

/// Fixed-length window of `(previous action, observation)` slots, oldest first.
/// Slots before the episode start stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow<S> {
    slot_len: usize,
    action_dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> HistoryWindow<S> {
    pub fn new(spec: &PolicySpec) -> Self {
        Self {
            slot_len: spec.slot_input(),
            action_dim: spec.action_dim,
            data: vec![S::zero(); spec.history_dim()],
        }
    }

    /// Drops the oldest slot and appends `(prev_action, observation)`.
    pub fn push(&mut self, prev_action: &[S], observation: &[S]) -> Result<()> {
        check_dim("history action", self.action_dim, prev_action.len())?;
        check_dim("history observation", self.slot_len - self.action_dim, observation.len())?;
        self.data.rotate_left(self.slot_len);
        let n = self.data.len();
        let slot = &mut self.data[n - self.slot_len..];
        slot[..self.action_dim].copy_from_slice(prev_action);
        slot[self.action_dim..].copy_from_slice(observation);
        Ok(())
    }

    pub fn from_flat(spec: &PolicySpec, data: Vec<S>) -> Result<Self> {
        check_dim("history", spec.history_dim(), data.len())?;
        Ok(Self {
            slot_len: spec.slot_input(),
            action_dim: spec.action_dim,
            data,
        })
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn slot(&self, k: usize) -> &[S] {
        &self.data[k * self.slot_len..(k + 1) * self.slot_len]
    }

    /// Observation part of the newest slot.
    pub fn latest_observation(&self) -> &[S] {
        latest_observation(&self.data, self.slot_len, self.action_dim)
    }
}

pub(crate) fn latest_observation<S>(flat: &[S], slot_len: usize, action_dim: usize) -> &[S] {
    &flat[flat.len() - slot_len + action_dim..]
}

/// Diagonal Gaussian over motor commands.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianActionDistribution<S> {
    pub mean: Vec<S>,
    pub log_std: Vec<S>,
}

impl<S: Scalar> GaussianActionDistribution<S> {
    pub fn std(&self) -> Vec<S> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<S> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &l)| {
                let z: f64 = rng.sample(StandardNormal);
                m + l.exp() * S::lit(z)
            })
            .collect()
    }

    pub fn log_prob(&self, action: &[S]) -> S {
        log_prob(self, action)
    }
}

pub fn log_prob<S: Scalar>(dist: &GaussianActionDistribution<S>, action: &[S]) -> S {
    let half_log_tau = S::lit(0.5 * std::f64::consts::TAU.ln());
    let half = S::lit(0.5);
    let mut acc = S::zero();
    for ((&a, &m), &l) in action.iter().zip(&dist.mean).zip(&dist.log_std) {
        let z = (a - m) / l.exp();
        acc -= half * z * z + l + half_log_tau;
    }
    acc
}

/// Closed-form `KL(old ‖ new)` between diagonal Gaussians.
pub fn kl_divergence<S: Scalar>(old: &GaussianActionDistribution<S>, new: &GaussianActionDistribution<S>) -> S {
    let half = S::lit(0.5);
    let mut acc = S::zero();
    for i in 0..old.mean.len() {
        let var_old = (old.log_std[i] + old.log_std[i]).exp();
        let var_new = (new.log_std[i] + new.log_std[i]).exp();
        let dm = old.mean[i] - new.mean[i];
        acc += new.log_std[i] - old.log_std[i] + (var_old + dm * dm) / (var_new + var_new) - half;
    }
    acc.max(S::zero())
}

/// Derivatives of a scalar objective with respect to the distribution's
/// mean and log standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient<S> {
    pub d_mean: Vec<S>,
    pub d_log_std: Vec<S>,
}

impl<S: Scalar> HeadGradient<S> {
    pub fn zeros(action_dim: usize) -> Self {
        Self {
            d_mean: vec![S::zero(); action_dim],
            d_log_std: vec![S::zero(); action_dim],
        }
    }

    pub fn scale(mut self, c: S) -> Self {
        self.d_mean.iter_mut().chain(self.d_log_std.iter_mut()).for_each(|v| *v *= c);
        self
    }
}

/// Gradient of `log_prob(dist, action)` with respect to the head.
pub fn log_prob_head_gradient<S: Scalar>(dist: &GaussianActionDistribution<S>, action: &[S]) -> HeadGradient<S> {
    let mut g = HeadGradient::zeros(action.len());
    for i in 0..action.len() {
        let inv_var = (-(dist.log_std[i] + dist.log_std[i])).exp();
        let diff = action[i] - dist.mean[i];
        g.d_mean[i] = diff * inv_var;
        g.d_log_std[i] = diff * diff * inv_var - S::one();
    }
    g
}

/// Gradient of `KL(old ‖ new)` with respect to the head of `new`.
pub fn kl_head_gradient<S: Scalar>(
    old: &GaussianActionDistribution<S>,
    new: &GaussianActionDistribution<S>,
) -> HeadGradient<S> {
    let n = old.mean.len();
    let mut g = HeadGradient::zeros(n);
    for i in 0..n {
        let inv_var_new = (-(new.log_std[i] + new.log_std[i])).exp();
        let var_old = (old.log_std[i] + old.log_std[i]).exp();
        let dm = new.mean[i] - old.mean[i];
        g.d_mean[i] = dm * inv_var_new;
        g.d_log_std[i] = S::one() - (var_old + dm * dm) * inv_var_new;
    }
    g
}

/// Activations of a batched forward pass, kept for backpropagation.
///
/// Slot rows are laid out transition-major, so the `rows·η × h2` slot
/// embedding matrix is also the `rows × η·h2` trunk input.
#[derive(Debug, Clone, Default)]
pub struct BatchCache<S> {
    rows: usize,
    input: Vec<S>,
    slot_h1: Vec<S>,
    slot_h2: Vec<S>,
    trunk: Vec<S>,
    mean: Vec<S>,
}

impl<S: Scalar> BatchCache<S> {
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Action mean of row `n`.
    pub fn mean(&self, n: usize) -> &[S] {
        let a = self.mean.len() / self.rows.max(1);
        &self.mean[n * a..(n + 1) * a]
    }
}

/// One parameter vector shared by every agent of the swarm.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<S> {
    pub spec: PolicySpec,
    pub values: Vec<S>,
}

/// `out ← act(x·Wᵀ + b)` for a row-major batch `x` and `W: [n_out][n_in]`.
fn dense_batch<S: Scalar>(x: &[S], rows: usize, w: &[S], b: &[S], act: Option<Activation>, out: &mut Vec<S>) {
    let n_out = b.len();
    let n_in = w.len() / n_out;
    out.clear();
    for _ in 0..rows {
        out.extend_from_slice(b);
    }
    gemm(MatRef::row_major(x, rows, n_in), MatRef::row_major(w, n_out, n_in).t(), S::one(), out);
    if let Some(a) = act {
        out.iter_mut().for_each(|v| *v = a.apply(*v));
    }
}

/// Adds `dᵀ·x` into `grad_w` and the column sums of `d` into `grad_b`.
fn dense_param_grad<S: Scalar>(x: &[S], d: &[S], rows: usize, grad_w: &mut [S], grad_b: &mut [S]) {
    let n_out = grad_b.len();
    let n_in = grad_w.len() / n_out;
    gemm(MatRef::row_major(d, rows, n_out).t(), MatRef::row_major(x, rows, n_in), S::one(), grad_w);
    for row in d.chunks_exact(n_out) {
        axpy(S::one(), row, grad_b);
    }
}

/// `d·W` scaled elementwise by the activation derivative at `h`.
fn dense_input_grad<S: Scalar>(d: &[S], rows: usize, w: &[S], h: &[S], act: Activation) -> Vec<S> {
    let n_in = h.len() / rows.max(1);
    let n_out = w.len() / n_in.max(1);
    let mut dx = vec![S::zero(); rows * n_in];
    gemm(MatRef::row_major(d, rows, n_out), MatRef::row_major(w, n_out, n_in), S::zero(), &mut dx);
    for (v, &hv) in dx.iter_mut().zip(h) {
        *v *= act.derivative_from_output(hv);
    }
    dx
}

impl<S: Scalar> PolicyParams<S> {
    pub fn zeros(spec: PolicySpec) -> Self {
        Self {
            values: vec![S::zero(); spec.n_params()],
            spec,
        }
    }

    pub fn from_values(spec: PolicySpec, values: Vec<S>) -> Result<Self> {
        check_dim("policy parameters", spec.n_params(), values.len())?;
        Ok(Self { spec, values })
    }

    pub fn log_std(&self) -> &[S] {
        &self.values[self.spec.layout().log_std]
    }

    pub fn forward(&self, history: &HistoryWindow<S>) -> Result<GaussianActionDistribution<S>> {
        check_dim("history", self.spec.history_dim(), history.as_slice().len())?;
        Ok(self.forward_flat(history.as_slice()))
    }

    /// Forward pass on a flat history of length `spec.history_dim()`.
    pub fn forward_flat(&self, history: &[S]) -> GaussianActionDistribution<S> {
        let mut cache = BatchCache::default();
        self.forward_batch([history], &mut cache);
        self.dist_at(&cache, 0)
    }

    /// Distribution of row `n` of a batched forward pass.
    pub fn dist_at(&self, cache: &BatchCache<S>, n: usize) -> GaussianActionDistribution<S> {
        GaussianActionDistribution {
            mean: cache.mean(n).to_vec(),
            log_std: self.log_std().to_vec(),
        }
    }

    /// Forward pass over flat histories, one row each.
    pub fn forward_batch<'a>(&self, histories: impl IntoIterator<Item = &'a [S]>, cache: &mut BatchCache<S>)
    where
        S: 'a,
    {
        let spec = &self.spec;
        let l = spec.layout();
        let p = &self.values;
        let act = Some(spec.activation);
        cache.input.clear();
        for h in histories {
            debug_assert_eq!(h.len(), spec.history_dim());
            cache.input.extend_from_slice(h);
        }
        let rows = cache.input.len() / spec.history_dim().max(1);
        cache.rows = rows;
        let slots = rows * spec.history_length;
        dense_batch(&cache.input, slots, &p[l.w1], &p[l.b1], act, &mut cache.slot_h1);
        dense_batch(&cache.slot_h1, slots, &p[l.w2], &p[l.b2], act, &mut cache.slot_h2);
        dense_batch(&cache.slot_h2, rows, &p[l.w3], &p[l.b3], act, &mut cache.trunk);
        dense_batch(&cache.trunk, rows, &p[l.w4], &p[l.b4], None, &mut cache.mean);
    }

    /// Backpropagates `heads[n]` through row `n` of `cache` and adds the
    /// summed parameter gradient into `grad`.
    pub fn backward_batch(&self, cache: &BatchCache<S>, heads: &[HeadGradient<S>], grad: &mut [S]) {
        let spec = &self.spec;
        let l = spec.layout();
        let p = &self.values;
        let act = spec.activation;
        let rows = cache.rows;
        let slots = rows * spec.history_length;
        assert_eq!(heads.len(), rows, "one head gradient per batch row");

        let mut d_mean = Vec::with_capacity(rows * spec.action_dim);
        for head in heads {
            d_mean.extend_from_slice(&head.d_mean);
            axpy(S::one(), &head.d_log_std, &mut grad[l.log_std.clone()]);
        }
        {
            let (gw, gb) = split_pair(grad, &l.w4, &l.b4);
            dense_param_grad(&cache.trunk, &d_mean, rows, gw, gb);
        }
        let d_trunk = dense_input_grad(&d_mean, rows, &p[l.w4.clone()], &cache.trunk, act);
        let d_slot_h1;
        {
            let (gw, gb) = split_pair(grad, &l.w3, &l.b3);
            dense_param_grad(&cache.slot_h2, &d_trunk, rows, gw, gb);
            let d_slot_h2 = dense_input_grad(&d_trunk, rows, &p[l.w3.clone()], &cache.slot_h2, act);
            let (gw, gb) = split_pair(grad, &l.w2, &l.b2);
            dense_param_grad(&cache.slot_h1, &d_slot_h2, slots, gw, gb);
            d_slot_h1 = dense_input_grad(&d_slot_h2, slots, &p[l.w2.clone()], &cache.slot_h1, act);
        }
        let (gw, gb) = split_pair(grad, &l.w1, &l.b1);
        dense_param_grad(&cache.input, &d_slot_h1, slots, gw, gb);
    }

    /// Gradient of `Σ_n objective_n` where `heads[n]` holds the objective's
    /// derivative with respect to the distribution at `histories[n]`.
    pub fn backward<'a>(&self, histories: impl IntoIterator<Item = &'a [S]>, heads: &[HeadGradient<S>]) -> Vec<S>
    where
        S: 'a,
    {
        let mut grad = vec![S::zero(); self.values.len()];
        let mut cache = BatchCache::default();
        self.forward_batch(histories, &mut cache);
        self.backward_batch(&cache, heads, &mut grad);
        grad
    }
}

fn split_pair<'g, S>(grad: &'g mut [S], w: &Range<usize>, b: &Range<usize>) -> (&'g mut [S], &'g mut [S]) {
    debug_assert_eq!(w.end, b.start);
    let (head, tail) = grad[w.start..b.end].split_at_mut(w.len());
    (head, tail)
}

/// Fan-in scaled Gaussian weights, zero biases, `log_std = ln 0.5`.
pub fn init_params<S: Scalar>(spec: &PolicySpec, seed: u64) -> PolicyParams<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = PolicyParams::zeros(*spec);
    let l = spec.layout();
    let fan_ins = [
        spec.slot_input(),
        spec.slot_hidden1,
        spec.history_length * spec.slot_hidden2,
        spec.trunk_hidden,
    ];
    for (k, (range, fan_in)) in l.weights().into_iter().zip(fan_ins).enumerate() {
        let mut scale = 1.0 / (fan_in.max(1) as f64).sqrt();
        if k == 3 {
            scale *= OUTPUT_INIT_SCALE;
        }
        for v in &mut params.values[range.clone()] {
            let z: f64 = rng.sample(StandardNormal);
            *v = S::lit(z * scale);
        }
    }
    for v in &mut params.values[l.log_std] {
        *v = S::lit(INITIAL_LOG_STD);
    }
    params
}
