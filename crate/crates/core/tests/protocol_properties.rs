use std::collections::HashMap;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use proptest::prelude::*;
use swarm_core::protocols::{
    assemble_observation, bearing_histogram, distance_histogram, joint_histogram, observation_dim,
    propagate_shortest_path, sense_neighbors, PathTracker,
};
use swarm_core::scalar::wrap_angle;
use swarm_core::sim::AgentState;
use swarm_core::{EdgeParams, LinkParams, ObservationMode, ProtocolConfig, SimConfig, TaskSpec, Vec2, WorldState};

fn arbitrary_world(max_agents: usize, spread: f64) -> impl Strategy<Value = WorldState> {
    let lo = 0.5 - spread / 2.0;
    let hi = 0.5 + spread / 2.0;
    let agent = (lo..hi, lo..hi, 0.0..std::f64::consts::TAU)
        .prop_map(|(x, y, th)| AgentState::at_rest(Vec2::new(x, y), th));
    (
        prop::collection::vec(agent, 2..=max_agents),
        prop::collection::vec((lo..hi, lo..hi), 2),
    )
        .prop_map(|(agents, pois)| WorldState {
            agents,
            pois: pois.into_iter().map(|(x, y)| Vec2::new(x, y)).collect(),
            time_step: 0,
        })
}

fn sim_for(w: &WorldState) -> SimConfig {
    SimConfig {
        n_agents: w.n_agents(),
        ..SimConfig::default()
    }
}

fn task_for(mode: ObservationMode) -> TaskSpec {
    if mode == ObservationMode::TwoDSp {
        TaskSpec::Link(LinkParams::default())
    } else {
        TaskSpec::Edge(EdgeParams::default())
    }
}

fn observations(w: &WorldState, mode: ObservationMode, rounds: usize) -> Vec<Vec<f64>> {
    let cfg = ProtocolConfig::with_mode(mode);
    let task = task_for(mode);
    let mut tracker = PathTracker::new(task.n_pois(), w.n_agents());
    if mode == ObservationMode::TwoDSp {
        for _ in 0..rounds {
            tracker.advance(w, &cfg).unwrap();
        }
    }
    (0..w.n_agents())
        .map(|i| assemble_observation(w, i, &tracker.estimates, &cfg, &sim_for(w), &task).unwrap().features)
        .collect()
}

fn rotate_world(w: &WorldState, angle: f64) -> WorldState {
    let c = Vec2::new(0.5, 0.5);
    let mut r = w.clone();
    for a in &mut r.agents {
        a.position = c + (a.position - c).rotate(angle);
        a.orientation = wrap_angle(a.orientation + angle);
    }
    for p in &mut r.pois {
        *p = c + (*p - c).rotate(angle);
    }
    r
}

/// Distances from `poi` to every agent over the communication graph.
fn dijkstra_oracle(w: &WorldState, poi: Vec2, radius: f64) -> Vec<Option<f64>> {
    let mut g = UnGraph::<(), f64>::new_undirected();
    let src = g.add_node(());
    let nodes: Vec<NodeIndex> = w.agents.iter().map(|_| g.add_node(())).collect();
    for (i, a) in w.agents.iter().enumerate() {
        let d = a.position.distance(poi);
        if d <= radius {
            g.add_edge(src, nodes[i], d);
        }
        for (j, b) in w.agents.iter().enumerate().skip(i + 1) {
            let d = a.position.distance(b.position);
            if d <= radius {
                g.add_edge(nodes[i], nodes[j], d);
            }
        }
    }
    let dist: HashMap<NodeIndex, f64> = dijkstra(&g, src, None, |e| *e.weight());
    nodes.iter().map(|n| dist.get(n).copied()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn histogram_counts_are_conserved(w in arbitrary_world(20, 0.6)) {
        let cfg = ProtocolConfig::default();
        for i in 0..w.n_agents() {
            let nbrs = sense_neighbors(&w, i, &cfg);
            let brute = (0..w.n_agents())
                .filter(|&j| j != i && w.agents[i].position.distance(w.agents[j].position) <= cfg.comm_radius)
                .count() as u32;
            let d = distance_histogram(&nbrs, &cfg);
            let b = bearing_histogram(&nbrs, &cfg);
            let j = joint_histogram(&nbrs, &cfg);
            prop_assert_eq!(d.total(), brute);
            prop_assert_eq!(b.total(), brute);
            prop_assert_eq!(j.total(), brute);
            prop_assert_eq!(j.distance_marginal(), d.counts);
            prop_assert_eq!(j.bearing_marginal(), b.counts);
        }
    }

    #[test]
    fn observation_length_depends_only_on_config(w in arbitrary_world(20, 1.0)) {
        for mode in ObservationMode::ALL {
            let dim = observation_dim(&ProtocolConfig::with_mode(mode), &task_for(mode)).unwrap();
            for obs in observations(&w, mode, 2) {
                prop_assert_eq!(obs.len(), dim);
                prop_assert!(obs.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn relabeling_other_agents_changes_nothing(w in arbitrary_world(20, 0.5), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let m = w.n_agents();
        let mut order: Vec<usize> = (1..m).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let mut permuted = w.clone();
        for (slot, &src) in order.iter().enumerate() {
            permuted.agents[slot + 1] = w.agents[src];
        }
        for mode in ObservationMode::ALL {
            let a = &observations(&w, mode, 3)[0];
            let b = &observations(&permuted, mode, 3)[0];
            prop_assert_eq!(a, b, "mode {}", mode);
        }
    }

    #[test]
    fn rotating_the_world_keeps_histograms_and_partitions(w in arbitrary_world(20, 0.6), angle in -3.1f64..3.1) {
        let rotated = rotate_world(&w, angle);
        let n_ir = ProtocolConfig::default().n_ir_sensors;
        for mode in [ObservationMode::Distance, ObservationMode::Bearing, ObservationMode::OneD, ObservationMode::TwoD, ObservationMode::TwoDSp] {
            for (a, b) in observations(&w, mode, 4).iter().zip(observations(&rotated, mode, 4)) {
                for (x, y) in a[n_ir..].iter().zip(&b[n_ir..]) {
                    prop_assert!((x - y).abs() < 1e-9, "mode {}: {} vs {}", mode, x, y);
                }
            }
        }
    }

    #[test]
    fn shortest_path_estimates_match_dijkstra(w in arbitrary_world(12, 0.7)) {
        let cfg = ProtocolConfig::default();
        for &poi in &w.pois {
            let oracle = dijkstra_oracle(&w, poi, cfg.comm_radius);
            let mut est = vec![None; w.n_agents()];
            for _ in 0..=w.n_agents() {
                let next = propagate_shortest_path(&w, &est, poi, &cfg).unwrap();
                for i in 0..w.n_agents() {
                    if let Some(v) = next[i] {
                        let truth = oracle[i].expect("estimate exists only for connected agents");
                        prop_assert!(v >= truth - 1e-12);
                        if let Some(prev) = est[i] {
                            prop_assert!(v <= prev);
                        }
                    }
                }
                est = next;
            }
            for i in 0..w.n_agents() {
                match (est[i], oracle[i]) {
                    (Some(v), Some(t)) => prop_assert!((v - t).abs() <= 1e-9),
                    (None, None) => {}
                    other => prop_assert!(false, "agent {} connectivity mismatch {:?}", i, other),
                }
            }
        }
    }
}
