use proptest::prelude::*;
use swarm_core::scalar::wrap_angle;
use swarm_core::sim::{relative_pose, reset_world, step_world, PENETRATION_TOLERANCE};
use swarm_core::{EdgeParams, LinkParams, MotorAction, SimConfig, TaskSpec, Vec2, WorldState};

fn config(n_agents: usize) -> SimConfig {
    SimConfig {
        n_agents,
        ..SimConfig::default()
    }
}

fn edge() -> TaskSpec {
    TaskSpec::Edge(EdgeParams::default())
}

/// Reset world with random initial velocities layered on top.
fn world_strategy() -> impl Strategy<Value = (SimConfig, WorldState)> {
    (2usize..=20, any::<u64>(), prop::collection::vec((-0.2f64..0.2, -0.2f64..0.2, -5.0f64..5.0), 20))
        .prop_map(|(m, seed, vels)| {
            let cfg = config(m);
            let mut w = reset_world(&cfg, &edge(), seed).unwrap();
            for (a, (vx, vy, om)) in w.agents.iter_mut().zip(vels) {
                a.linear_velocity = Vec2::new(vx, vy);
                a.angular_velocity = om;
            }
            (cfg, w)
        })
}

fn actions_strategy() -> impl Strategy<Value = Vec<MotorAction>> {
    prop::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0), 20)
        .prop_map(|v| v.into_iter().map(|(l, r)| MotorAction::new(l, r)).collect())
}

fn rotate_about_center(p: Vec2, cfg: &SimConfig, angle: f64) -> Vec2 {
    let c = cfg.arena_center();
    c + (p - c).rotate(angle)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn step_keeps_agents_inside_and_apart((cfg, w) in world_strategy(), actions in actions_strategy()) {
        let acts = &actions[..w.n_agents()];
        let mut cur = w;
        for _ in 0..5 {
            cur = step_world(&cur, acts, &cfg).unwrap();
            for a in &cur.agents {
                let r = cfg.agent_radius;
                prop_assert!(a.position.x >= r && a.position.x <= cfg.arena_width - r);
                prop_assert!(a.position.y >= r && a.position.y <= cfg.arena_height - r);
                prop_assert!(a.orientation >= 0.0 && a.orientation < std::f64::consts::TAU);
            }
            prop_assert!(cur.max_penetration(&cfg) < PENETRATION_TOLERANCE);
        }
    }

    #[test]
    fn zero_action_never_adds_energy((cfg, w) in world_strategy()) {
        let zero = vec![MotorAction::default(); w.n_agents()];
        let mut cur = w;
        for _ in 0..5 {
            let next = step_world(&cur, &zero, &cfg).unwrap();
            prop_assert!(next.kinetic_energy(&cfg) <= cur.kinetic_energy(&cfg) * (1.0 + 1e-12) + 1e-18);
            cur = next;
        }
    }

    #[test]
    fn step_is_bitwise_deterministic((cfg, w) in world_strategy(), actions in actions_strategy()) {
        let acts = &actions[..w.n_agents()];
        let a = step_world(&w, acts, &cfg).unwrap();
        let b = step_world(&w.clone(), acts, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn relative_pose_survives_rigid_motion(
        (cfg, w) in world_strategy(),
        angle in -3.0f64..3.0,
        shift in (-0.3f64..0.3, -0.3f64..0.3),
    ) {
        let v = Vec2::new(shift.0, shift.1);
        for i in 0..w.n_agents() {
            for j in 0..w.n_agents() {
                if i == j {
                    continue;
                }
                let (d, b) = relative_pose(&w.agents[i], w.agents[j].position);

                let mut me = w.agents[i];
                me.position += v;
                let (dt, bt) = relative_pose(&me, w.agents[j].position + v);
                prop_assert!((d - dt).abs() < 1e-12);
                prop_assert!(angle_gap(b, bt) < 1e-9);

                let mut me = w.agents[i];
                me.position = rotate_about_center(me.position, &cfg, angle);
                me.orientation = wrap_angle(me.orientation + angle);
                let (dr, br) = relative_pose(&me, rotate_about_center(w.agents[j].position, &cfg, angle));
                prop_assert!((d - dr).abs() < 1e-12);
                prop_assert!(angle_gap(b, br) < 1e-9);
            }
        }
    }

    #[test]
    fn quarter_turn_of_square_arena_commutes_with_step(
        (cfg, w) in world_strategy(),
        actions in actions_strategy(),
    ) {
        let acts = &actions[..w.n_agents()];
        let turn = |w: &WorldState| {
            let mut r = w.clone();
            for a in &mut r.agents {
                a.position = rotate_about_center(a.position, &cfg, std::f64::consts::FRAC_PI_2);
                a.linear_velocity = a.linear_velocity.rotate(std::f64::consts::FRAC_PI_2);
                a.orientation = wrap_angle(a.orientation + std::f64::consts::FRAC_PI_2);
            }
            r
        };
        let a = turn(&step_world(&w, acts, &cfg).unwrap());
        let b = step_world(&turn(&w), acts, &cfg).unwrap();
        for (x, y) in a.agents.iter().zip(&b.agents) {
            prop_assert!(x.position.distance(y.position) < 1e-9);
            prop_assert!((x.linear_velocity - y.linear_velocity).norm() < 1e-9);
            prop_assert!(angle_gap(x.orientation, y.orientation) < 1e-9);
        }
    }

    #[test]
    fn reset_places_everything_legally(m in 1usize..=20, seed in any::<u64>()) {
        let cfg = config(m);
        let task = TaskSpec::Link(LinkParams::default());
        let w = reset_world(&cfg, &task, seed).unwrap();
        prop_assert_eq!(w.n_agents(), m);
        prop_assert_eq!(w.pois.len(), 2);
        prop_assert!(w.pois[0].distance(w.pois[1]) >= 0.75);
        prop_assert!(w.max_penetration(&cfg) == 0.0);
        prop_assert_eq!(w.kinetic_energy(&cfg), 0.0);
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}
