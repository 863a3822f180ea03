//! Local observation models: IR range sensors, neighborhood count histograms
//! and shortest-path partitions.
//!
//! All histograms bin egocentric `(distance, bearing)` relations to agents
//! within the communication radius. Distance bins split `[0, comm_radius]`
//! into equal half-open intervals with the last one closed; bearing bins split
//! `[0, 2π)` into equal half-open sectors starting at the agent's heading.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{Position, Vec2};
use crate::scalar::Scalar;
use crate::sim::{relative_pose, SimConfig, WorldState};
use crate::tasks::TaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObservationMode {
    /// IR readings only.
    #[serde(rename = "SENSOR")]
    Sensor,
    /// Distance histogram.
    #[serde(rename = "D")]
    Distance,
    /// Bearing histogram.
    #[serde(rename = "B")]
    Bearing,
    /// Distance and bearing histograms side by side.
    #[serde(rename = "1D")]
    OneD,
    /// Joint distance × bearing histogram.
    #[serde(rename = "2D")]
    TwoD,
    /// Joint histogram plus one shortest-path partition per point of interest.
    #[serde(rename = "2DSP")]
    TwoDSp,
}

impl ObservationMode {
    pub const ALL: [ObservationMode; 6] = [
        ObservationMode::Sensor,
        ObservationMode::Distance,
        ObservationMode::Bearing,
        ObservationMode::OneD,
        ObservationMode::TwoD,
        ObservationMode::TwoDSp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ObservationMode::Sensor => "SENSOR",
            ObservationMode::Distance => "D",
            ObservationMode::Bearing => "B",
            ObservationMode::OneD => "1D",
            ObservationMode::TwoD => "2D",
            ObservationMode::TwoDSp => "2DSP",
        }
    }
}

impl fmt::Display for ObservationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "S: crate::scalar::Scalar + serde::Deserialize<'de>"))]
pub struct ProtocolConfig<S> {
    pub comm_radius: S,
    pub n_distance_bins: usize,
    pub n_bearing_bins: usize,
    pub mode: ObservationMode,
    /// Cap used when encoding shortest-path estimates into `[0, 1]`.
    pub sp_max_distance: S,
    pub n_ir_sensors: usize,
    pub ir_range: S,
    /// Angular spread of the IR rays, centered on the heading.
    pub ir_fov: S,
}

impl<S: Scalar> Default for ProtocolConfig<S> {
    fn default() -> Self {
        Self {
            comm_radius: S::lit(0.2),
            n_distance_bins: 4,
            n_bearing_bins: 8,
            mode: ObservationMode::TwoD,
            sp_max_distance: S::lit(1.5),
            n_ir_sensors: 4,
            ir_range: S::lit(0.05),
            ir_fov: S::FRAC_PI_2(),
        }
    }
}

impl<S: Scalar> ProtocolConfig<S> {
    pub fn with_mode(mode: ObservationMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self, sim: &SimConfig<S>, task: &TaskSpec<S>) -> Result<()> {
        if !(self.comm_radius > S::zero()) {
            return Err(Error::InvalidConfig("protocol.comm_radius must be > 0".into()));
        }
        if self.n_distance_bins == 0 || self.n_bearing_bins == 0 {
            return Err(Error::InvalidConfig("protocol bin counts must be >= 1".into()));
        }
        if !(self.ir_range > S::zero()) || self.ir_fov < S::zero() {
            return Err(Error::InvalidConfig("protocol IR geometry must be positive".into()));
        }
        if self.sp_max_distance < sim.arena_diagonal() {
            return Err(Error::InvalidConfig(
                "protocol.sp_max_distance must be at least the arena diagonal".into(),
            ));
        }
        check_mode(self.mode, task)
    }

    fn distance_bin(&self, distance: S) -> usize {
        let width = self.comm_radius / S::from_usize_lossy(self.n_distance_bins);
        bin_index(distance / width, self.n_distance_bins)
    }

    fn bearing_bin(&self, bearing: S) -> usize {
        let width = S::TAU() / S::from_usize_lossy(self.n_bearing_bins);
        bin_index(bearing / width, self.n_bearing_bins)
    }

    fn joint_len(&self) -> usize {
        self.n_distance_bins * self.n_bearing_bins
    }
}

fn bin_index<S: Scalar>(scaled: S, n_bins: usize) -> usize {
    let idx = scaled.floor().to_usize().unwrap_or(0);
    idx.min(n_bins - 1)
}

fn check_mode<S: Scalar>(mode: ObservationMode, task: &TaskSpec<S>) -> Result<()> {
    if mode == ObservationMode::TwoDSp && !matches!(task, TaskSpec::Link(_)) {
        return Err(Error::ModeTaskMismatch {
            mode: mode.to_string(),
            task: task.name(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborRelation<S> {
    pub distance: S,
    pub bearing: S,
    pub neighbor_id: usize,
}

/// All other agents within the communication radius, in agent-index order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborSet<S> {
    pub relations: Vec<NeighborRelation<S>>,
}

impl<S> NeighborSet<S> {
    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

pub fn sense_neighbors<S: Scalar>(world: &WorldState<S>, agent_id: usize, config: &ProtocolConfig<S>) -> NeighborSet<S> {
    let me = &world.agents[agent_id];
    let relations = world
        .agents
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != agent_id)
        .filter_map(|(j, other)| {
            let (distance, bearing) = relative_pose(me, other.position);
            (distance <= config.comm_radius).then_some(NeighborRelation {
                distance,
                bearing,
                neighbor_id: j,
            })
        })
        .collect();
    NeighborSet { relations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistogramShape {
    Distance(usize),
    Bearing(usize),
    /// Row-major `distance × bearing`.
    Joint(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountHistogram {
    pub counts: Vec<u32>,
    pub shape: HistogramShape,
}

impl CountHistogram {
    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Counts divided by `n_agents - 1`, the largest possible neighbor count.
    pub fn normalized<S: Scalar>(&self, n_agents: usize) -> Vec<S> {
        let denom = S::from_usize_lossy(n_agents.saturating_sub(1).max(1));
        self.counts
            .iter()
            .map(|&c| S::from_u32(c).unwrap_or_else(S::zero) / denom)
            .collect()
    }

    /// Sums over bearings of a joint histogram.
    pub fn distance_marginal(&self) -> Vec<u32> {
        match self.shape {
            HistogramShape::Joint(_, nb) => self.counts.chunks(nb).map(|row| row.iter().sum()).collect(),
            _ => self.counts.clone(),
        }
    }

    /// Sums over distances of a joint histogram.
    pub fn bearing_marginal(&self) -> Vec<u32> {
        match self.shape {
            HistogramShape::Joint(_, nb) => {
                let mut out = vec![0; nb];
                for row in self.counts.chunks(nb) {
                    for (o, c) in out.iter_mut().zip(row) {
                        *o += c;
                    }
                }
                out
            }
            _ => self.counts.clone(),
        }
    }
}

pub fn distance_histogram<S: Scalar>(nbrs: &NeighborSet<S>, config: &ProtocolConfig<S>) -> CountHistogram {
    let mut counts = vec![0; config.n_distance_bins];
    for r in &nbrs.relations {
        counts[config.distance_bin(r.distance)] += 1;
    }
    CountHistogram {
        counts,
        shape: HistogramShape::Distance(config.n_distance_bins),
    }
}

pub fn bearing_histogram<S: Scalar>(nbrs: &NeighborSet<S>, config: &ProtocolConfig<S>) -> CountHistogram {
    let mut counts = vec![0; config.n_bearing_bins];
    for r in &nbrs.relations {
        counts[config.bearing_bin(r.bearing)] += 1;
    }
    CountHistogram {
        counts,
        shape: HistogramShape::Bearing(config.n_bearing_bins),
    }
}

pub fn joint_histogram<S: Scalar>(nbrs: &NeighborSet<S>, config: &ProtocolConfig<S>) -> CountHistogram {
    let mut counts = vec![0; config.joint_len()];
    for r in &nbrs.relations {
        counts[config.distance_bin(r.distance) * config.n_bearing_bins + config.bearing_bin(r.bearing)] += 1;
    }
    CountHistogram {
        counts,
        shape: HistogramShape::Joint(config.n_distance_bins, config.n_bearing_bins),
    }
}

/// Body-frame angles of the IR rays, evenly spread across the field of view.
pub fn ir_ray_offsets<S: Scalar>(config: &ProtocolConfig<S>) -> Vec<S> {
    let n = config.n_ir_sensors;
    if n == 1 {
        return vec![S::zero()];
    }
    let half = config.ir_fov / S::lit(2.0);
    let step = config.ir_fov / S::from_usize_lossy(n - 1);
    (0..n).map(|k| -half + step * S::from_usize_lossy(k)).collect()
}

/// Proximity readings in `[0, 1]`: `1 - min(hit, range) / range`, 0 when
/// nothing is within range of a ray.
pub fn ir_sensor_readings<S: Scalar>(
    world: &WorldState<S>,
    agent_id: usize,
    config: &ProtocolConfig<S>,
    sim: &SimConfig<S>,
) -> Vec<S> {
    let me = &world.agents[agent_id];
    ir_ray_offsets(config)
        .into_iter()
        .map(|offset| {
            let dir = Vec2::from_angle(me.orientation + offset);
            let mut hit = wall_hit_distance(me.position, dir, sim);
            for (j, other) in world.agents.iter().enumerate() {
                if j == agent_id {
                    continue;
                }
                if let Some(t) = ray_circle_hit(me.position, dir, other.position, sim.agent_radius) {
                    hit = hit.min(t);
                }
            }
            S::one() - hit.min(config.ir_range) / config.ir_range
        })
        .collect()
}

fn wall_hit_distance<S: Scalar>(origin: Position<S>, dir: Vec2<S>, sim: &SimConfig<S>) -> S {
    let mut best = S::infinity();
    let axis = |o: S, d: S, hi: S| -> S {
        if d > S::zero() {
            (hi - o) / d
        } else if d < S::zero() {
            -o / d
        } else {
            S::infinity()
        }
    };
    best = best.min(axis(origin.x, dir.x, sim.arena_width));
    best = best.min(axis(origin.y, dir.y, sim.arena_height));
    best.max(S::zero())
}

/// Distance along a unit ray to the first intersection with a circle.
fn ray_circle_hit<S: Scalar>(origin: Position<S>, dir: Vec2<S>, center: Position<S>, radius: S) -> Option<S> {
    let to_center = center - origin;
    let along = to_center.dot(dir);
    let perp_sq = to_center.norm_sq() - along * along;
    let r_sq = radius * radius;
    if perp_sq > r_sq {
        return None;
    }
    let half_chord = (r_sq - perp_sq).max(S::zero()).sqrt();
    let far = along + half_chord;
    if far < S::zero() {
        return None;
    }
    Some((along - half_chord).max(S::zero()))
}

/// Per-agent shortest-path-to-POI estimate; `None` means unknown.
pub type PathEstimate<S> = Option<S>;

/// One synchronous message round of the distributed shortest-path protocol.
///
/// Every agent takes the minimum of its direct distance to the point (if in
/// range) and each in-range neighbor's previous estimate plus the hop length.
pub fn propagate_shortest_path<S: Scalar>(
    world: &WorldState<S>,
    prev: &[PathEstimate<S>],
    poi: Position<S>,
    config: &ProtocolConfig<S>,
) -> Result<Vec<PathEstimate<S>>> {
    check_dim("shortest-path estimates", world.agents.len(), prev.len())?;
    let r = config.comm_radius;
    let next = world
        .agents
        .iter()
        .enumerate()
        .map(|(i, me)| {
            let direct = me.position.distance(poi);
            let mut best = (direct <= r).then_some(direct);
            for (j, other) in world.agents.iter().enumerate() {
                let Some(via) = prev[j] else { continue };
                if j == i {
                    continue;
                }
                let hop = me.position.distance(other.position);
                if hop <= r {
                    let cand = via + hop;
                    if best.is_none_or(|b| cand < b) {
                        best = Some(cand);
                    }
                }
            }
            best
        })
        .collect();
    Ok(next)
}

/// Distance × bearing grid holding, per cell, the encoded minimum estimate
/// among neighbors located there.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPathPartition<S> {
    pub cells: Vec<S>,
    pub n_distance_bins: usize,
    pub n_bearing_bins: usize,
}

impl<S: Scalar> ShortestPathPartition<S> {
    pub fn cell(&self, distance_bin: usize, bearing_bin: usize) -> S {
        self.cells[distance_bin * self.n_bearing_bins + bearing_bin]
    }
}

/// Encodes `v` as `(cap - min(v, cap)) / cap`: 1 at the point itself, 0 at or past the cap.
pub fn encode_estimate<S: Scalar>(v: S, cap: S) -> S {
    (cap - v.min(cap)) / cap
}

pub fn shortest_path_partition<S: Scalar>(
    nbrs: &NeighborSet<S>,
    estimates: &[PathEstimate<S>],
    config: &ProtocolConfig<S>,
) -> ShortestPathPartition<S> {
    let mut best: Vec<Option<S>> = vec![None; config.joint_len()];
    for r in &nbrs.relations {
        let Some(v) = estimates.get(r.neighbor_id).copied().flatten() else {
            continue;
        };
        let cell = &mut best[config.distance_bin(r.distance) * config.n_bearing_bins + config.bearing_bin(r.bearing)];
        if cell.is_none_or(|b| v < b) {
            *cell = Some(v);
        }
    }
    ShortestPathPartition {
        cells: best
            .into_iter()
            .map(|c| c.map_or(S::zero(), |v| encode_estimate(v, config.sp_max_distance)))
            .collect(),
        n_distance_bins: config.n_distance_bins,
        n_bearing_bins: config.n_bearing_bins,
    }
}

/// Length of the observation vector for a protocol/task pair.
pub fn observation_dim<S: Scalar>(config: &ProtocolConfig<S>, task: &TaskSpec<S>) -> Result<usize> {
    check_mode(config.mode, task)?;
    let (nd, nb, joint) = (config.n_distance_bins, config.n_bearing_bins, config.joint_len());
    let features = match config.mode {
        ObservationMode::Sensor => 0,
        ObservationMode::Distance => nd,
        ObservationMode::Bearing => nb,
        ObservationMode::OneD => nd + nb,
        ObservationMode::TwoD => joint,
        ObservationMode::TwoDSp => joint + task.n_pois() * joint,
    };
    Ok(config.n_ir_sensors + features)
}

/// Flat observation: IR readings followed by the mode's features.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector<S> {
    pub features: Vec<S>,
}

impl<S> ObservationVector<S> {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Builds agent `agent_id`'s observation. `estimates[k]` holds every agent's
/// shortest-path estimate towards point of interest `k`; it may be empty for
/// modes that do not use it.
pub fn assemble_observation<S: Scalar>(
    world: &WorldState<S>,
    agent_id: usize,
    estimates: &[Vec<PathEstimate<S>>],
    config: &ProtocolConfig<S>,
    sim: &SimConfig<S>,
    task: &TaskSpec<S>,
) -> Result<ObservationVector<S>> {
    let dim = observation_dim(config, task)?;
    let m = world.n_agents();
    let mut features = Vec::with_capacity(dim);
    features.extend(ir_sensor_readings(world, agent_id, config, sim));
    let nbrs = || sense_neighbors(world, agent_id, config);
    match config.mode {
        ObservationMode::Sensor => {}
        ObservationMode::Distance => features.extend(distance_histogram(&nbrs(), config).normalized::<S>(m)),
        ObservationMode::Bearing => features.extend(bearing_histogram(&nbrs(), config).normalized::<S>(m)),
        ObservationMode::OneD => {
            let n = nbrs();
            features.extend(distance_histogram(&n, config).normalized::<S>(m));
            features.extend(bearing_histogram(&n, config).normalized::<S>(m));
        }
        ObservationMode::TwoD => features.extend(joint_histogram(&nbrs(), config).normalized::<S>(m)),
        ObservationMode::TwoDSp => {
            let n = nbrs();
            features.extend(joint_histogram(&n, config).normalized::<S>(m));
            check_dim("shortest-path channels", task.n_pois(), estimates.len())?;
            for per_poi in estimates {
                check_dim("shortest-path estimates", m, per_poi.len())?;
                features.extend(shortest_path_partition(&n, per_poi, config).cells);
            }
        }
    }
    debug_assert_eq!(features.len(), dim);
    Ok(ObservationVector { features })
}

/// Tracks the shortest-path estimates of every agent towards every point of
/// interest across simulation steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTracker<S> {
    pub estimates: Vec<Vec<PathEstimate<S>>>,
}

impl<S: Scalar> PathTracker<S> {
    pub fn new(n_pois: usize, n_agents: usize) -> Self {
        Self {
            estimates: vec![vec![None; n_agents]; n_pois],
        }
    }

    /// Runs one message round per point of interest against `world`.
    pub fn advance(&mut self, world: &WorldState<S>, config: &ProtocolConfig<S>) -> Result<()> {
        for (poi, est) in world.pois.iter().zip(self.estimates.iter_mut()) {
            *est = propagate_shortest_path(world, est, *poi, config)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::AgentState;
    use crate::tasks::{EdgeParams, LinkParams};
    use std::f64::consts::PI;

    fn agent_at(x: f64, y: f64, orientation: f64) -> AgentState<f64> {
        AgentState::at_rest(Position::new(x, y), orientation)
    }

    fn cfg() -> ProtocolConfig<f64> {
        ProtocolConfig::default()
    }

    fn nbrs(pairs: &[(f64, f64)]) -> NeighborSet<f64> {
        NeighborSet {
            relations: pairs
                .iter()
                .enumerate()
                .map(|(k, &(distance, bearing))| NeighborRelation {
                    distance,
                    bearing,
                    neighbor_id: k,
                })
                .collect(),
        }
    }

    fn world(agents: Vec<AgentState<f64>>) -> WorldState<f64> {
        WorldState {
            agents,
            pois: vec![],
            time_step: 0,
        }
    }

    #[test]
    fn lone_agent_has_no_neighbors() {
        let w = world(vec![agent_at(0.5, 0.5, 0.0)]);
        assert!(sense_neighbors(&w, 0, &cfg()).is_empty());
    }

    #[test]
    fn all_in_range_excludes_self() {
        let agents = (0..10)
            .map(|k| agent_at(0.5 + 0.01 * (k as f64).cos() * 5.0, 0.5 + 0.05 * (k as f64).sin(), 0.0))
            .collect();
        let w = world(agents);
        let n = sense_neighbors(&w, 3, &cfg());
        assert_eq!(n.len(), 9);
        assert!(n.relations.iter().all(|r| r.neighbor_id != 3));
    }

    #[test]
    fn comm_radius_boundary_is_closed() {
        let w = world(vec![agent_at(0.25, 0.5, 0.0), agent_at(0.5, 0.5, 0.0), agent_at(0.75, 0.5, 0.0)]);
        let c = ProtocolConfig {
            comm_radius: 0.25,
            ..cfg()
        };
        // brute-force scan of the pairwise distances against the radius
        for i in 0..3 {
            let expected: Vec<usize> = (0..3)
                .filter(|&j| j != i && w.agents[i].position.distance(w.agents[j].position) <= 0.25)
                .collect();
            let got: Vec<usize> = sense_neighbors(&w, i, &c).relations.iter().map(|r| r.neighbor_id).collect();
            assert_eq!(got, expected);
        }
        assert_eq!(sense_neighbors(&w, 1, &c).len(), 2);
    }

    #[test]
    fn distance_histogram_binning() {
        assert_eq!(distance_histogram(&nbrs(&[]), &cfg()).counts, vec![0; 4]);
        let h = distance_histogram(&nbrs(&[(0.02, 0.0), (0.07, 0.0), (0.12, 0.0)]), &cfg());
        assert_eq!(h.counts, vec![1, 1, 1, 0]);
        let h = distance_histogram(&nbrs(&[(0.2, 0.0)]), &cfg());
        assert_eq!(h.counts, vec![0, 0, 0, 1]);
    }

    #[test]
    fn bearing_histogram_binning() {
        assert_eq!(bearing_histogram(&nbrs(&[]), &cfg()).counts, vec![0; 8]);
        let h = bearing_histogram(
            &nbrs(&[(0.1, 0.0), (0.1, PI / 2.0), (0.1, PI), (0.1, 1.5 * PI)]),
            &cfg(),
        );
        assert_eq!(h.counts, vec![1, 0, 1, 0, 1, 0, 1, 0]);
        let h = bearing_histogram(&nbrs(&[(0.1, 2.0 * PI - 1e-12)]), &cfg());
        assert_eq!(h.counts[7], 1);
    }

    #[test]
    fn joint_histogram_binning_and_marginals() {
        assert_eq!(joint_histogram(&nbrs(&[]), &cfg()).counts, vec![0; 32]);
        let h = joint_histogram(&nbrs(&[(0.12, PI / 2.0)]), &cfg());
        let mut expected = vec![0; 32];
        expected[2 * 8 + 2] = 1;
        assert_eq!(h.counts, expected);

        let set = nbrs(&[(0.01, 0.3), (0.19, 6.0), (0.07, 3.3), (0.11, 0.3), (0.2, 4.0)]);
        let j = joint_histogram(&set, &cfg());
        assert_eq!(j.distance_marginal(), distance_histogram(&set, &cfg()).counts);
        assert_eq!(j.bearing_marginal(), bearing_histogram(&set, &cfg()).counts);
        assert_eq!(j.total(), 5);
    }

    #[test]
    fn normalization_divides_by_max_neighbors() {
        let h = distance_histogram(&nbrs(&[(0.02, 0.0), (0.03, 0.0)]), &cfg());
        assert_eq!(h.normalized::<f64>(5), vec![0.5, 0.0, 0.0, 0.0]);
        assert_eq!(h.normalized::<f64>(1), vec![2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn ir_nothing_in_range() {
        let w = world(vec![agent_at(0.5, 0.5, 0.0)]);
        let sim = SimConfig::default();
        assert_eq!(ir_sensor_readings(&w, 0, &cfg(), &sim), vec![0.0; 4]);
    }

    #[test]
    fn ir_wall_at_exact_range_reads_zero() {
        let c = ProtocolConfig {
            n_ir_sensors: 1,
            ..cfg()
        };
        let w = world(vec![agent_at(0.95, 0.5, 0.0)]);
        let r = ir_sensor_readings(&w, 0, &c, &SimConfig::default());
        assert!(r[0].abs() < 1e-12);
        let w = world(vec![agent_at(0.97, 0.5, 0.0)]);
        let r = ir_sensor_readings(&w, 0, &c, &SimConfig::default());
        assert!((r[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ir_neighbor_dead_ahead() {
        let c = ProtocolConfig {
            n_ir_sensors: 3,
            ..cfg()
        };
        let sim = SimConfig::default();
        // neighbor front surface at ir_range / 2 from the observer center
        let gap = c.ir_range / 2.0 + sim.agent_radius;
        let heading = 0.9;
        let me = agent_at(0.5, 0.5, heading);
        let target = me.position + Vec2::from_angle(heading) * gap;
        let w = world(vec![me, agent_at(target.x, target.y, 0.0)]);
        let r = ir_sensor_readings(&w, 0, &c, &sim);
        assert!((r[1] - 0.5).abs() < 1e-12);

        // analytic ray-circle oracle for the side rays
        for (k, offset) in ir_ray_offsets(&c).into_iter().enumerate() {
            let phi: f64 = offset;
            let perp = gap * phi.sin().abs();
            let expected = if perp > sim.agent_radius {
                0.0
            } else {
                let hit = gap * phi.cos() - (sim.agent_radius.powi(2) - perp * perp).sqrt();
                1.0 - hit.min(c.ir_range) / c.ir_range
            };
            assert!((r[k] - expected).abs() < 1e-12, "ray {k}");
        }
    }

    #[test]
    fn ray_offsets_span_fov() {
        let o = ir_ray_offsets(&cfg());
        assert_eq!(o.len(), 4);
        assert!((o[0] + PI / 4.0).abs() < 1e-15 && (o[3] - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn chain_propagation_one_hop_per_round() {
        let mut w = world(vec![agent_at(0.15, 0.0, 0.0), agent_at(0.30, 0.0, 0.0), agent_at(0.45, 0.0, 0.0)]);
        w.pois = vec![Position::new(0.0, 0.0)];
        let c = cfg();
        let poi = w.pois[0];
        let r1 = propagate_shortest_path(&w, &[None, None, None], poi, &c).unwrap();
        assert_eq!(r1[0], Some(0.15));
        assert_eq!(&r1[1..], &[None, None]);
        let r2 = propagate_shortest_path(&w, &r1, poi, &c).unwrap();
        assert!((r2[1].unwrap() - 0.30).abs() < 1e-12);
        assert_eq!(r2[2], None);
        let r3 = propagate_shortest_path(&w, &r2, poi, &c).unwrap();
        assert!((r3[2].unwrap() - 0.45).abs() < 1e-12);
    }

    #[test]
    fn direct_observation_dominates() {
        let mut w = world(vec![agent_at(0.1, 0.0, 0.0), agent_at(0.0, 0.12, 0.0)]);
        w.pois = vec![Position::new(0.0, 0.0)];
        let r = propagate_shortest_path(&w, &[Some(0.5), Some(0.5)], w.pois[0], &cfg()).unwrap();
        assert_eq!(r, vec![Some(0.1), Some(0.12)]);
    }

    #[test]
    fn isolated_agent_stays_unknown() {
        let w = world(vec![agent_at(0.9, 0.9, 0.0)]);
        let mut est = vec![None];
        for _ in 0..5 {
            est = propagate_shortest_path(&w, &est, Position::new(0.0, 0.0), &cfg()).unwrap();
        }
        assert_eq!(est, vec![None]);
        assert!(propagate_shortest_path(&w, &[], Position::new(0.0, 0.0), &cfg()).is_err());
    }

    #[test]
    fn partition_encoding() {
        let c = cfg();
        let empty = shortest_path_partition(&nbrs(&[]), &[], &c);
        assert!(empty.cells.iter().all(|&v| v == 0.0));

        // distance bin 1 = [0.05, 0.1), bearing bin 3 = [3π/4, π)
        let set = nbrs(&[(0.07, 2.5)]);
        let p = shortest_path_partition(&set, &[Some(0.3)], &c);
        let expected = (1.5 - 0.3) / 1.5;
        assert!((p.cell(1, 3) - expected).abs() < 1e-15);
        assert!((p.cell(1, 3) - 0.8).abs() < 1e-12);
        assert_eq!(p.cells.iter().filter(|&&v| v != 0.0).count(), 1);

        let set = nbrs(&[(0.07, 2.5), (0.08, 2.6), (0.09, 2.4)]);
        let p = shortest_path_partition(&set, &[Some(0.9), Some(0.3), None], &c);
        assert!((p.cell(1, 3) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn observation_dimensions() {
        let edge = TaskSpec::Edge(EdgeParams::default());
        let link = TaskSpec::Link(LinkParams::default());
        let dim = |m, t: &TaskSpec<f64>| observation_dim(&ProtocolConfig::with_mode(m), t).unwrap();
        assert_eq!(dim(ObservationMode::Sensor, &edge), 4);
        assert_eq!(dim(ObservationMode::Distance, &edge), 8);
        assert_eq!(dim(ObservationMode::Bearing, &edge), 12);
        assert_eq!(dim(ObservationMode::OneD, &edge), 16);
        assert_eq!(dim(ObservationMode::TwoD, &edge), 36);
        assert_eq!(dim(ObservationMode::TwoDSp, &link), 100);
        assert!(matches!(
            observation_dim(&ProtocolConfig::with_mode(ObservationMode::TwoDSp), &edge),
            Err(Error::ModeTaskMismatch { .. })
        ));
    }

    #[test]
    fn assemble_sensor_only() {
        let w = world(vec![agent_at(0.5, 0.5, 0.0), agent_at(0.55, 0.5, 0.0)]);
        let edge = TaskSpec::Edge(EdgeParams::default());
        let c = ProtocolConfig::with_mode(ObservationMode::Sensor);
        let o = assemble_observation(&w, 0, &[], &c, &SimConfig::default(), &edge).unwrap();
        assert_eq!(o.len(), 4);
    }

    #[test]
    fn assemble_2dsp_layout() {
        let mut w = world(vec![agent_at(0.3, 0.5, 0.0), agent_at(0.4, 0.5, 0.0), agent_at(0.5, 0.5, 0.0)]);
        w.pois = vec![Position::new(0.2, 0.5), Position::new(0.95, 0.5)];
        let link = TaskSpec::Link(LinkParams::default());
        let c = ProtocolConfig::with_mode(ObservationMode::TwoDSp);
        let sim = SimConfig::default();
        let mut tracker = PathTracker::new(2, 3);
        tracker.advance(&w, &c).unwrap();
        tracker.advance(&w, &c).unwrap();
        let o = assemble_observation(&w, 1, &tracker.estimates, &c, &sim, &link).unwrap();
        assert_eq!(o.len(), 100);
        // agent 0 is behind agent 1 (bearing π, distance 0.1 -> bin 2) with estimate 0.1
        let first_partition = &o.features[4 + 32..4 + 64];
        let expected = (1.5 - 0.1) / 1.5;
        assert!((first_partition[2 * 8 + 4] - expected).abs() < 1e-12);
        // nobody knows the far point yet
        assert!(o.features[4 + 64..].iter().all(|&v| v == 0.0));
        assert!(assemble_observation(&w, 1, &[], &c, &sim, &link).is_err());
    }
}
