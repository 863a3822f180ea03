//! Differential-drive circle physics in a walled rectangular arena.
//!
//! Every agent is a disc driven by two body-frame forward forces applied at
//! `±wheel_offset` from its center. Integration is semi-implicit Euler with
//! exponential velocity damping; contacts are resolved by positional
//! projection plus an inelastic normal response.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{Position, Vec2};
use crate::scalar::{wrap_angle, Scalar};
use crate::tasks::{self, TaskSpec};

/// Rejection attempts allowed per agent when spawning.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;
/// Extra clearance between spawned agents on top of touching distance.
pub const SPAWN_CLEARANCE: f64 = 0.005;
/// Contact passes per substep.
pub const MAX_COLLISION_PASSES: usize = 8;
/// Penetration below which contact resolution stops early.
pub const PENETRATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "S: crate::scalar::Scalar + serde::Deserialize<'de>"))]
pub struct SimConfig<S> {
    pub n_agents: usize,
    pub arena_width: S,
    pub arena_height: S,
    pub agent_radius: S,
    pub agent_mass: S,
    pub moment_of_inertia: S,
    /// Lateral distance from the center to each force application point.
    pub wheel_offset: S,
    pub max_force: S,
    pub linear_damping: S,
    pub angular_damping: S,
    pub control_dt: S,
    pub physics_substeps: usize,
}

impl<S: Scalar> Default for SimConfig<S> {
    fn default() -> Self {
        Self {
            n_agents: 10,
            arena_width: S::one(),
            arena_height: S::one(),
            agent_radius: S::lit(0.02),
            agent_mass: S::lit(0.05),
            moment_of_inertia: S::lit(1e-5),
            wheel_offset: S::lit(0.015),
            max_force: S::lit(0.05),
            linear_damping: S::lit(5.0),
            angular_damping: S::lit(5.0),
            control_dt: S::lit(0.1),
            physics_substeps: 10,
        }
    }
}

impl<S: Scalar> SimConfig<S> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("arena_width", self.arena_width),
            ("arena_height", self.arena_height),
            ("agent_radius", self.agent_radius),
            ("agent_mass", self.agent_mass),
            ("moment_of_inertia", self.moment_of_inertia),
            ("wheel_offset", self.wheel_offset),
            ("max_force", self.max_force),
            ("control_dt", self.control_dt),
        ];
        for (name, v) in positive {
            if !(v > S::zero() && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("sim.{name} must be > 0")));
            }
        }
        if self.linear_damping < S::zero() || self.angular_damping < S::zero() {
            return Err(Error::InvalidConfig("sim damping must be >= 0".into()));
        }
        if self.physics_substeps == 0 {
            return Err(Error::InvalidConfig("sim.physics_substeps must be >= 1".into()));
        }
        if self.n_agents == 0 {
            return Err(Error::InvalidConfig("sim.n_agents must be >= 1".into()));
        }
        let quarter = self.arena_width.min(self.arena_height) / S::lit(4.0);
        if self.agent_radius >= quarter {
            return Err(Error::InvalidConfig(
                "sim.agent_radius must be below a quarter of the smaller arena side".into(),
            ));
        }
        Ok(())
    }

    pub fn substep_dt(&self) -> S {
        self.control_dt / S::from_usize_lossy(self.physics_substeps)
    }

    pub fn arena_center(&self) -> Position<S> {
        let half = S::lit(0.5);
        Vec2::new(self.arena_width * half, self.arena_height * half)
    }

    pub fn arena_diagonal(&self) -> S {
        self.arena_width.hypot(self.arena_height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState<S> {
    pub position: Position<S>,
    /// Heading in `[0, 2π)`.
    pub orientation: S,
    pub linear_velocity: Vec2<S>,
    pub angular_velocity: S,
}

impl<S: Scalar> AgentState<S> {
    pub fn at_rest(position: Position<S>, orientation: S) -> Self {
        Self {
            position,
            orientation: wrap_angle(orientation),
            linear_velocity: Vec2::zero(),
            angular_velocity: S::zero(),
        }
    }

    pub fn heading(&self) -> Vec2<S> {
        Vec2::from_angle(self.orientation)
    }
}

/// Global swarm state: every agent plus the task's points of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState<S> {
    pub agents: Vec<AgentState<S>>,
    pub pois: Vec<Position<S>>,
    pub time_step: usize,
}

impl<S: Scalar> WorldState<S> {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Total translational plus rotational kinetic energy.
    pub fn kinetic_energy(&self, config: &SimConfig<S>) -> S {
        let half = S::lit(0.5);
        self.agents
            .iter()
            .map(|a| {
                half * config.agent_mass * a.linear_velocity.norm_sq()
                    + half * config.moment_of_inertia * a.angular_velocity * a.angular_velocity
            })
            .sum()
    }

    /// Largest pairwise overlap between agent discs (0 when none overlap).
    pub fn max_penetration(&self, config: &SimConfig<S>) -> S {
        let contact = config.agent_radius + config.agent_radius;
        let mut worst = S::zero();
        for (i, a) in self.agents.iter().enumerate() {
            for b in &self.agents[i + 1..] {
                worst = worst.max(contact - a.position.distance(b.position));
            }
        }
        worst
    }
}

/// Normalized motor command; each side is clamped to `[-1, 1]` before use.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotorAction<S> {
    pub left_force: S,
    pub right_force: S,
}

impl<S: Scalar> MotorAction<S> {
    pub fn new(left_force: S, right_force: S) -> Self {
        Self {
            left_force,
            right_force,
        }
    }

    pub fn clamped(self) -> Self {
        let one = S::one();
        let clamp = |v: S| if v.is_nan() { S::zero() } else { v.max(-one).min(one) };
        Self::new(clamp(self.left_force), clamp(self.right_force))
    }

    pub fn from_slice(a: &[S]) -> Self {
        Self::new(a[0], a[1])
    }
}

/// Spawns a fresh episode. Agents are rejection-sampled so that no two centers
/// are closer than touching distance plus [`SPAWN_CLEARANCE`].
pub fn reset_world<S: Scalar>(config: &SimConfig<S>, task: &TaskSpec<S>, seed: u64) -> Result<WorldState<S>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = config.agent_radius;
    let min_dist = r + r + S::lit(SPAWN_CLEARANCE);
    let mut agents: Vec<AgentState<S>> = Vec::with_capacity(config.n_agents);
    for _ in 0..config.n_agents {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let x = sample_between(&mut rng, r, config.arena_width - r);
            let y = sample_between(&mut rng, r, config.arena_height - r);
            let p = Vec2::new(x, y);
            if agents.iter().all(|a| a.position.distance(p) >= min_dist) {
                placed = Some(p);
                break;
            }
        }
        let position = placed.ok_or(Error::Placement {
            what: "agent",
            attempts: MAX_PLACEMENT_ATTEMPTS,
        })?;
        let orientation = wrap_angle(S::lit(rng.gen::<f64>()) * S::TAU());
        agents.push(AgentState::at_rest(position, orientation));
    }
    let pois = match task {
        TaskSpec::Edge(_) => Vec::new(),
        TaskSpec::Link(params) => {
            let (a, b) = tasks::spawn_pois(&mut rng, config, params)?;
            vec![a, b]
        }
    };
    Ok(WorldState {
        agents,
        pois,
        time_step: 0,
    })
}

pub(crate) fn sample_between<S: Scalar, R: Rng>(rng: &mut R, lo: S, hi: S) -> S {
    lo + (hi - lo) * S::lit(rng.gen::<f64>())
}

/// Advances the world by one control step.
pub fn step_world<S: Scalar>(
    world: &WorldState<S>,
    actions: &[MotorAction<S>],
    config: &SimConfig<S>,
) -> Result<WorldState<S>> {
    check_dim("actions", world.agents.len(), actions.len())?;
    let mut next = world.clone();
    let dt = config.substep_dt();
    let lin_decay = (-config.linear_damping * dt).exp();
    let ang_decay = (-config.angular_damping * dt).exp();
    let commands: Vec<MotorAction<S>> = actions.iter().map(|a| a.clamped()).collect();
    for _ in 0..config.physics_substeps {
        for (agent, cmd) in next.agents.iter_mut().zip(&commands) {
            let f_left = cmd.left_force * config.max_force;
            let f_right = cmd.right_force * config.max_force;
            let thrust = f_left + f_right;
            let torque = (f_right - f_left) * config.wheel_offset;
            let accel = agent.heading() * (thrust / config.agent_mass);
            agent.linear_velocity = (agent.linear_velocity + accel * dt) * lin_decay;
            agent.angular_velocity =
                (agent.angular_velocity + torque / config.moment_of_inertia * dt) * ang_decay;
            agent.position += agent.linear_velocity * dt;
            agent.orientation = wrap_angle(agent.orientation + agent.angular_velocity * dt);
        }
        resolve_collisions_in_place(&mut next, config);
    }
    next.time_step += 1;
    Ok(next)
}

/// Pushes overlapping agents apart and back inside the walls.
pub fn resolve_collisions<S: Scalar>(world: &WorldState<S>, config: &SimConfig<S>) -> WorldState<S> {
    let mut next = world.clone();
    resolve_collisions_in_place(&mut next, config);
    next
}

pub(crate) fn resolve_collisions_in_place<S: Scalar>(world: &mut WorldState<S>, config: &SimConfig<S>) {
    let r = config.agent_radius;
    let contact = r + r;
    let half = S::lit(0.5);
    let tol = S::lit(PENETRATION_TOLERANCE);
    let n = world.agents.len();
    for _ in 0..MAX_COLLISION_PASSES {
        for i in 0..n {
            for j in (i + 1)..n {
                let delta = world.agents[j].position - world.agents[i].position;
                let dist = delta.norm();
                let penetration = contact - dist;
                if penetration <= S::zero() {
                    continue;
                }
                let normal = if dist > S::zero() {
                    delta * (S::one() / dist)
                } else {
                    Vec2::new(S::one(), S::zero())
                };
                let shift = normal * (penetration * half);
                let (before_i, before_j) = (world.agents[i].position - shift, world.agents[j].position + shift);
                world.agents[i].position = before_i;
                world.agents[j].position = before_j;
                clamp_to_walls(&mut world.agents[i], config);
                clamp_to_walls(&mut world.agents[j], config);
                // a wall that blocked one side hands its share to the partner
                let pinned_i = world.agents[i].position != before_i;
                let pinned_j = world.agents[j].position != before_j;
                if pinned_i != pinned_j {
                    let gap = world.agents[j].position - world.agents[i].position;
                    let rest = contact - gap.norm();
                    if rest > S::zero() && gap.norm() > S::zero() {
                        let push = gap * (rest / gap.norm());
                        let free = if pinned_i { j } else { i };
                        let sign = if pinned_i { S::one() } else { -S::one() };
                        world.agents[free].position += push * sign;
                        clamp_to_walls(&mut world.agents[free], config);
                    }
                }
                let closing = (world.agents[j].linear_velocity - world.agents[i].linear_velocity).dot(normal);
                if closing < S::zero() {
                    let impulse = normal * (closing * half);
                    world.agents[i].linear_velocity += impulse;
                    world.agents[j].linear_velocity -= impulse;
                }
            }
        }
        for agent in world.agents.iter_mut() {
            clamp_to_walls(agent, config);
        }
        if world.max_penetration(config) < tol {
            break;
        }
    }
}

fn clamp_to_walls<S: Scalar>(agent: &mut AgentState<S>, config: &SimConfig<S>) {
    let r = config.agent_radius;
    let (max_x, max_y) = (config.arena_width - r, config.arena_height - r);
    let p = &mut agent.position;
    let v = &mut agent.linear_velocity;
    if p.x < r {
        p.x = r;
        v.x = v.x.max(S::zero());
    } else if p.x > max_x {
        p.x = max_x;
        v.x = v.x.min(S::zero());
    }
    if p.y < r {
        p.y = r;
        v.y = v.y.max(S::zero());
    } else if p.y > max_y {
        p.y = max_y;
        v.y = v.y.min(S::zero());
    }
}

/// Egocentric `(distance, bearing)` from `observer` to `target`. Bearing is
/// measured from the observer's heading, wrapped to `[0, 2π)`. A coincident
/// target yields `(0, 0)`.
pub fn relative_pose<S: Scalar>(observer: &AgentState<S>, target: Position<S>) -> (S, S) {
    let delta = target - observer.position;
    let distance = delta.norm();
    if distance == S::zero() {
        return (S::zero(), S::zero());
    }
    (distance, wrap_angle(delta.angle() - observer.orientation))
}
