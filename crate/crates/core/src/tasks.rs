//! Global reward functions for the edge-formation and link-building tasks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Position;
use crate::scalar::Scalar;
use crate::sim::{sample_between, SimConfig, WorldState};

/// Rejection attempts allowed when placing the two link endpoints.
pub const MAX_POI_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
#[serde(bound(deserialize = "S: crate::scalar::Scalar + serde::Deserialize<'de>"))]
pub enum TaskSpec<S> {
    Edge(EdgeParams<S>),
    Link(LinkParams<S>),
}

impl<S: Scalar> TaskSpec<S> {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Edge(_) => "edge",
            TaskSpec::Link(_) => "link",
        }
    }

    pub fn n_pois(&self) -> usize {
        match self {
            TaskSpec::Edge(_) => 0,
            TaskSpec::Link(_) => 2,
        }
    }

    pub fn reward(&self, world: &WorldState<S>) -> S {
        match self {
            TaskSpec::Edge(p) => edge_reward(world, p),
            TaskSpec::Link(p) => link_reward(world, p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TaskSpec::Edge(p) => p.validate(),
            TaskSpec::Link(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "S: crate::scalar::Scalar + serde::Deserialize<'de>"))]
pub struct EdgeParams<S> {
    /// Closed interval of pair distances that count as an active edge.
    pub reward_range: [S; 2],
    /// Closed interval of pair distances that are penalized.
    pub penalty_range: [S; 2],
    pub penalty_weight: S,
}

impl<S: Scalar> Default for EdgeParams<S> {
    fn default() -> Self {
        Self {
            reward_range: [S::lit(0.10), S::lit(0.16)],
            penalty_range: [S::zero(), S::lit(0.07)],
            penalty_weight: S::lit(5.0),
        }
    }
}

impl<S: Scalar> EdgeParams<S> {
    pub fn validate(&self) -> Result<()> {
        let [rl, rh] = self.reward_range;
        let [pl, ph] = self.penalty_range;
        if !(rl <= rh && pl <= ph && ph < rl) {
            return Err(Error::InvalidConfig(
                "edge ranges must be ordered and the penalty range must lie below the reward range".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "S: crate::scalar::Scalar + serde::Deserialize<'de>"))]
pub struct LinkParams<S> {
    /// Endpoints are resampled until strictly farther apart than this.
    pub min_separation: S,
    /// Maximum hop length in the communication graph; equals the protocol radius.
    pub link_radius: S,
    /// Distance kept between endpoints and the walls.
    pub poi_margin: S,
}

impl<S: Scalar> Default for LinkParams<S> {
    fn default() -> Self {
        Self {
            min_separation: S::lit(0.75),
            link_radius: S::lit(0.2),
            poi_margin: S::lit(0.05),
        }
    }
}

impl<S: Scalar> LinkParams<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.link_radius > S::zero() && self.min_separation >= S::zero() && self.poi_margin >= S::zero()) {
            return Err(Error::InvalidConfig("link parameters must be non-negative, radius > 0".into()));
        }
        Ok(())
    }
}

/// Pair counts behind the edge reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeCounts {
    pub active: usize,
    pub penalized: usize,
}

pub fn edge_counts<S: Scalar>(world: &WorldState<S>, params: &EdgeParams<S>) -> EdgeCounts {
    let [rl, rh] = params.reward_range;
    let [pl, ph] = params.penalty_range;
    let mut counts = EdgeCounts::default();
    for (i, a) in world.agents.iter().enumerate() {
        for b in &world.agents[i + 1..] {
            let d = a.position.distance(b.position);
            if d >= rl && d <= rh {
                counts.active += 1;
            } else if d >= pl && d <= ph {
                counts.penalized += 1;
            }
        }
    }
    counts
}

/// `+1` per agent pair inside the reward range, `-penalty_weight` per pair
/// inside the penalty range.
pub fn edge_reward<S: Scalar>(world: &WorldState<S>, params: &EdgeParams<S>) -> S {
    let c = edge_counts(world, params);
    S::from_usize_lossy(c.active) - params.penalty_weight * S::from_usize_lossy(c.penalized)
}

/// Draws the two link endpoints uniformly inside the arena margin.
pub fn spawn_pois<S: Scalar, R: Rng>(
    rng: &mut R,
    arena: &SimConfig<S>,
    params: &LinkParams<S>,
) -> Result<(Position<S>, Position<S>)> {
    let m = params.poi_margin;
    let sample = |rng: &mut R| {
        Position::new(
            sample_between(rng, m, arena.arena_width - m),
            sample_between(rng, m, arena.arena_height - m),
        )
    };
    for _ in 0..MAX_POI_ATTEMPTS {
        let a = sample(rng);
        let b = sample(rng);
        if a.distance(b) > params.min_separation {
            return Ok((a, b));
        }
    }
    Err(Error::Placement {
        what: "points of interest",
        attempts: MAX_POI_ATTEMPTS,
    })
}

/// Undirected communication graph. Nodes 0 and 1 are the two points of
/// interest, node `k + 2` is agent `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph<S> {
    pub nodes: Vec<Position<S>>,
    pub adjacency: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> CommGraph<S> {
    pub fn new(poi_a: Position<S>, poi_b: Position<S>, agents: impl IntoIterator<Item = Position<S>>, radius: S) -> Self {
        let mut nodes = vec![poi_a, poi_b];
        nodes.extend(agents);
        let n = nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = nodes[i].distance(nodes[j]);
                if d <= radius {
                    adjacency[i].push((j, d));
                    adjacency[j].push((i, d));
                }
            }
        }
        Self { nodes, adjacency }
    }

    pub fn from_world(world: &WorldState<S>, radius: S) -> Option<Self> {
        match world.pois.as_slice() {
            [a, b, ..] => Some(Self::new(*a, *b, world.agents.iter().map(|s| s.position), radius)),
            _ => None,
        }
    }

    /// Dense Dijkstra from `source`; `None` marks unreachable nodes.
    pub fn distances_from(&self, source: usize) -> Vec<Option<S>> {
        let n = self.nodes.len();
        let mut dist: Vec<Option<S>> = vec![None; n];
        let mut done = vec![false; n];
        dist[source] = Some(S::zero());
        loop {
            let mut best: Option<(usize, S)> = None;
            for (i, d) in dist.iter().enumerate() {
                if let (false, Some(d)) = (done[i], d) {
                    if best.is_none_or(|(_, b)| *d < b) {
                        best = Some((i, *d));
                    }
                }
            }
            let Some((u, du)) = best else { break };
            done[u] = true;
            for &(v, w) in &self.adjacency[u] {
                let cand = du + w;
                if !done[v] && dist[v].is_none_or(|dv| cand < dv) {
                    dist[v] = Some(cand);
                }
            }
        }
        dist
    }
}

/// Length of the shortest active path between the two points of interest.
pub fn shortest_link_length<S: Scalar>(graph: &CommGraph<S>) -> Option<S> {
    graph.distances_from(0)[1]
}

/// `d_opt / d_sp` while a link exists, 0 otherwise.
pub fn link_reward<S: Scalar>(world: &WorldState<S>, params: &LinkParams<S>) -> S {
    let Some(graph) = CommGraph::from_world(world, params.link_radius) else {
        return S::zero();
    };
    match shortest_link_length(&graph) {
        Some(d_sp) if d_sp > S::zero() => {
            let d_opt = graph.nodes[0].distance(graph.nodes[1]);
            (d_opt / d_sp).min(S::one())
        }
        Some(_) => S::one(),
        None => S::zero(),
    }
}
