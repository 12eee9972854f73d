use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::sim_env::{action_dim, JamEvent};

fn still(n_agents: usize, area_km: f64) -> EnvConfig {
    EnvConfig {
        n_agents,
        area_km,
        n_gateways: 1,
        mobility_speed_kmps: 0.0,
        battery_drain: 0.0,
        ..EnvConfig::default()
    }
}

fn random_actions(rng: &mut ChaCha8Rng, n: usize) -> Vec<ActionVector> {
    (0..n)
        .map(|_| {
            let v = (0..action_dim()).map(|_| rng.random_range(-1.0..=1.0)).collect();
            ActionVector::new(v).unwrap()
        })
        .collect()
}

/// Brute-force neighbor order: every other in-range node by (distance, index).
fn oracle_neighbors(positions: &[[f64; 2]], agent: usize, range: f64) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..positions.len())
        .filter(|&j| j != agent)
        .map(|j| {
            let dx = positions[j][0] - positions[agent][0];
            let dy = positions[j][1] - positions[agent][1];
            (j, (dx * dx + dy * dy).sqrt())
        })
        .filter(|&(_, d)| d <= range)
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(NEIGHBOR_SLOTS);
    all
}

#[test]
fn default_world_initial_state() {
    let world = WorldState::new(EnvConfig { seed: 7, ..EnvConfig::default() }).unwrap();
    assert_eq!(world.n_agents(), 20);
    assert_eq!(world.step_index(), 0);
    assert_eq!(world.in_flight(), 0);
    for (i, node) in world.nodes().iter().enumerate() {
        assert_eq!(node.is_gateway, i < 2);
        assert_eq!(node.battery, 1.0);
        assert!(node.queue.is_empty());
        assert!((0.0..=5.0).contains(&node.position[0]));
        assert!((0.0..=5.0).contains(&node.position[1]));
    }
    for link in world.links() {
        assert!(link.endpoints.0 < link.endpoints.1);
        assert!(link.distance_km <= 2.0);
        assert!(!link.jammed);
    }
}

#[test]
fn two_agents_one_gateway() {
    let world = WorldState::new(EnvConfig { n_agents: 2, n_gateways: 1, ..EnvConfig::default() })
        .unwrap();
    assert!(world.nodes()[0].is_gateway);
    assert!(!world.nodes()[1].is_gateway);
}

#[test]
fn single_agent_rejected_naming_field() {
    let err = WorldState::new(EnvConfig { n_agents: 1, ..EnvConfig::default() }).unwrap_err();
    assert!(err.to_string().contains("n_agents"), "{err}");
}

#[test]
fn same_seed_same_trajectory() {
    let cfg = EnvConfig { seed: 42, ..EnvConfig::default() };
    let mut a = WorldState::new(cfg.clone()).unwrap();
    let mut b = WorldState::new(cfg).unwrap();
    assert_eq!(a, b);
    let mut ra = ChaCha8Rng::seed_from_u64(1);
    let mut rb = ChaCha8Rng::seed_from_u64(1);
    while !a.is_done() {
        let oa = a.step(&random_actions(&mut ra, 20)).unwrap();
        let ob = b.step(&random_actions(&mut rb, 20)).unwrap();
        assert_eq!(oa, ob);
    }
    assert_eq!(a, b);
}

#[test]
fn different_seeds_differ() {
    let a = WorldState::new(EnvConfig { seed: 1, ..EnvConfig::default() }).unwrap();
    let b = WorldState::new(EnvConfig { seed: 2, ..EnvConfig::default() }).unwrap();
    assert_ne!(a.nodes()[0].position, b.nodes()[0].position);
}

#[test]
fn isolated_node_sees_no_neighbors() {
    let cfg = EnvConfig { link_range_km: 1.0, ..still(3, 10.0) };
    let world = WorldState::from_positions(cfg, vec![[0.0, 0.0], [0.5, 0.0], [9.0, 9.0]]).unwrap();
    let obs = world.observe(2).unwrap();
    let v = obs.as_slice();
    for slot in 0..NEIGHBOR_SLOTS {
        assert_eq!(v[Observation::LINK_QUALITY + slot], 0.0);
        assert_eq!(v[Observation::NEIGHBOR_QUEUE + slot], 0.0);
        assert_eq!(v[Observation::NEIGHBOR_GATEWAY + slot], 0.0);
    }
    assert_eq!(v[Observation::BATTERY], 1.0);
    assert_eq!(v[Observation::QUEUE_FILL], 0.0);
    assert_eq!(v[Observation::JAM], 0.0);
}

#[test]
fn three_node_line_neighbor_order() {
    let cfg = still(3, 3.0);
    let positions = vec![[0.5, 1.5], [1.5, 1.5], [2.5, 1.5]];
    let world = WorldState::from_positions(cfg, positions.clone()).unwrap();
    // Middle node is equidistant from both ends; the lower index wins.
    assert_eq!(world.neighbors(1), vec![0, 2]);
    assert_eq!(world.neighbors(2), vec![1, 0]);
    for agent in 0..3 {
        let expected = oracle_neighbors(&positions, agent, 2.0);
        let obs = world.observe(agent).unwrap();
        for (slot, &(_, d)) in expected.iter().enumerate() {
            assert_eq!(obs.link_quality(slot), (1.0 - d / 2.0).clamp(0.0, 1.0));
        }
    }
}

#[test]
fn neighbor_order_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..30 {
        let world = WorldState::new(EnvConfig { seed, ..EnvConfig::default() }).unwrap();
        let positions: Vec<[f64; 2]> = world.nodes().iter().map(|n| n.position).collect();
        let agent = rng.random_range(0..20);
        let expected: Vec<usize> =
            oracle_neighbors(&positions, agent, 2.0).into_iter().map(|(j, _)| j).collect();
        assert_eq!(world.neighbors(agent), expected);
    }
}

#[test]
fn observe_out_of_range_agent() {
    let world = WorldState::new(EnvConfig::default()).unwrap();
    assert!(matches!(world.observe(20), Err(Error::AgentOutOfRange { agent: 20, .. })));
}

#[test]
fn step_rejects_wrong_action_count() {
    let mut world = WorldState::new(EnvConfig::default()).unwrap();
    let err = world.step(&vec![ActionVector::hold(); 3]).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { expected: 20, actual: 3, .. }));
}

#[test]
fn step_after_episode_end_fails() {
    let mut world = WorldState::new(EnvConfig { episode_len: 2, ..EnvConfig::default() }).unwrap();
    let hold = vec![ActionVector::hold(); 20];
    world.step(&hold).unwrap();
    world.step(&hold).unwrap();
    assert!(world.is_done());
    assert!(matches!(world.step(&hold), Err(Error::EpisodeOver(2))));
}

#[test]
fn holding_delivers_nothing() {
    let mut world = WorldState::new(EnvConfig { seed: 5, ..EnvConfig::default() }).unwrap();
    let hold = vec![ActionVector::hold(); 20];
    while !world.is_done() {
        let out = world.step(&hold).unwrap();
        assert_eq!(out.delivered, 0);
    }
    assert!(world.ledger().generated > 0);
}

#[test]
fn lossless_pair_delivers_everything() {
    let cfg = EnvConfig { base_capacity: 1000, queue_capacity: 1000, ..still(2, 2.0) };
    let mut world = WorldState::from_positions(cfg, vec![[1.0, 1.0], [1.0, 1.0]]).unwrap();
    assert_eq!(world.link(0, 1).unwrap().quality, 1.0);
    let actions = vec![ActionVector::hold(), ActionVector::send_all(0)];
    while !world.is_done() {
        let out = world.step(&actions).unwrap();
        assert_eq!(out.delivered, out.generated);
        assert_eq!(out.dropped, 0);
        assert_eq!(out.delivered_latency_sum_ms, 0.0);
    }
    assert_eq!(world.in_flight(), 0);
}

#[test]
fn three_node_chain_binomial() {
    // Gateway, relay, source on a line one kilometre apart: each hop
    // succeeds with probability 0.5, and node 2 cannot reach the gateway.
    let cfg = EnvConfig {
        episode_len: 1000,
        base_capacity: 10_000,
        queue_capacity: 10_000,
        traffic_rate: 2.0,
        seed: 11,
        ..still(3, 3.0)
    };
    let mut world =
        WorldState::from_positions(cfg, vec![[0.5, 1.5], [1.5, 1.5], [2.5, 1.5]]).unwrap();
    assert_eq!(world.link(0, 1).unwrap().quality, 0.5);
    assert_eq!(world.link(1, 2).unwrap().quality, 0.5);
    assert_eq!(world.link(0, 2).unwrap().quality, 0.0);
    let actions = vec![ActionVector::hold(), ActionVector::send_all(0), ActionVector::send_all(0)];
    let mut generated = [0u64; 3];
    let mut delivered = [0u64; 3];
    let mut last_from_source = 0;
    while !world.is_done() {
        let out = world.step(&actions).unwrap();
        for i in 0..3 {
            generated[i] += out.generated_by_source[i];
            delivered[i] += out.delivered_by_source[i];
        }
        last_from_source = out.generated_by_source[2];
    }
    // Packets created at the source in the final step never reach the
    // second hop.
    let trials = [(generated[1], 0.5), (generated[2] - last_from_source, 0.25)];
    let mut mean = 0.0;
    let mut var = 0.0;
    for (src, &(n, p)) in trials.iter().enumerate() {
        let m = n as f64 * p;
        let s = (n as f64 * p * (1.0 - p)).sqrt();
        let got = delivered[src + 1] as f64;
        assert!((got - m).abs() <= 3.0 * s, "source {}: {got} vs {m} +- {s}", src + 1);
        mean += m;
        var += s * s;
    }
    let total = (delivered[1] + delivered[2]) as f64;
    assert!((total - mean).abs() <= 3.0 * var.sqrt(), "{total} vs {mean}");
}

#[test]
fn jamming_flags_links_touching_disc() {
    let jam = JamEvent {
        start_step: 0,
        end_step: 10,
        center: [0.5, 0.5],
        radius_km: 0.2,
        loss_boost: 0.3,
    };
    let cfg = EnvConfig { jam_schedule: vec![jam], ..still(4, 3.0) };
    let positions = vec![[0.5, 0.5], [1.0, 0.5], [2.0, 0.5], [2.9, 0.5]];
    let world = WorldState::from_positions(cfg, positions).unwrap();
    for link in world.links() {
        let touches = link.endpoints.0 == 0;
        assert_eq!(link.jammed, touches, "{:?}", link.endpoints);
        let base = (1.0 - link.distance_km / 2.0).max(0.0);
        let expected = if touches { (base - 0.3).max(0.0) } else { base };
        assert!((link.quality - expected).abs() < 1e-15);
    }
    assert_eq!(world.observe(1).unwrap().as_slice()[Observation::JAM], 1.0);
    assert_eq!(world.observe(3).unwrap().as_slice()[Observation::JAM], 0.0);
}

#[test]
fn full_boost_silences_covered_links() {
    let jam = JamEvent {
        start_step: 0,
        end_step: 100,
        center: [2.5, 2.5],
        radius_km: 10.0,
        loss_boost: 1.0,
    };
    let mut world = WorldState::new(EnvConfig { jam_schedule: vec![jam], ..EnvConfig::default() })
        .unwrap();
    assert!(world.links().iter().all(|l| l.quality == 0.0 && l.jammed));
    let send: Vec<ActionVector> = (0..20).map(|_| ActionVector::send_all(0)).collect();
    while !world.is_done() {
        let out = world.step(&send).unwrap();
        assert_eq!(out.delivered, 0);
    }
}

#[test]
fn inactive_events_change_nothing() {
    let jam = JamEvent {
        start_step: 500,
        end_step: 600,
        center: [2.5, 2.5],
        radius_km: 10.0,
        loss_boost: 1.0,
    };
    let plain = WorldState::new(EnvConfig { seed: 3, ..EnvConfig::default() }).unwrap();
    let mut jammed =
        WorldState::new(EnvConfig { seed: 3, jam_schedule: vec![jam], ..EnvConfig::default() })
            .unwrap();
    jammed.apply_jamming();
    assert_eq!(plain.links(), jammed.links());
}

#[test]
fn transmitting_over_jammed_link_is_detected() {
    let jam = JamEvent {
        start_step: 0,
        end_step: 10,
        center: [1.0, 1.0],
        radius_km: 0.1,
        loss_boost: 0.1,
    };
    let cfg = EnvConfig { traffic_rate: 5.0, jam_schedule: vec![jam], ..still(3, 3.0) };
    let mut world =
        WorldState::from_positions(cfg, vec![[1.0, 1.0], [1.5, 1.0], [2.9, 2.9]]).unwrap();
    let actions = vec![ActionVector::hold(), ActionVector::send_all(0), ActionVector::send_all(0)];
    let out = world.step(&actions).unwrap();
    assert!(out.adversarial_detected[1]);
    assert!(!out.adversarial_detected[0]);
    assert!(!out.adversarial_detected[2]);
}

#[test]
fn packets_are_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..100 {
        let cfg = EnvConfig { seed, ..EnvConfig::default() };
        let mut world = WorldState::new(cfg).unwrap();
        while !world.is_done() {
            world.step(&random_actions(&mut rng, 20)).unwrap();
            let l = world.ledger();
            assert_eq!(l.generated, l.delivered + l.dropped + world.in_flight(), "seed {seed}");
        }
    }
}

#[test]
fn observations_and_latency_stay_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for seed in 0..20 {
        let cfg = EnvConfig { seed, ..EnvConfig::default() };
        let max_latency = cfg.episode_len as f64 * cfg.step_seconds * 1000.0;
        let mut world = WorldState::new(cfg).unwrap();
        while !world.is_done() {
            for obs in world.observe_all() {
                assert!(obs.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            }
            let out = world.step(&random_actions(&mut rng, 20)).unwrap();
            let lat = out.mean_latency_ms();
            assert!((0.0..=max_latency).contains(&lat));
            for node in world.nodes() {
                assert!((0.0..=5.0).contains(&node.position[0]));
                assert!((0.0..=1.0).contains(&node.battery));
                assert!(node.queue.len() <= 20);
            }
        }
    }
}

#[test]
fn jamming_does_not_raise_expected_delivery() {
    let jam = JamEvent {
        start_step: 0,
        end_step: 100,
        center: [2.5, 2.5],
        radius_km: 1.5,
        loss_boost: 0.5,
    };
    let send: Vec<ActionVector> = (0..20).map(|_| ActionVector::send_all(0)).collect();
    let run = |schedule: Vec<JamEvent>| -> u64 {
        (0..200)
            .map(|seed| {
                let cfg = EnvConfig { seed, jam_schedule: schedule.clone(), ..EnvConfig::default() };
                let mut world = WorldState::new(cfg).unwrap();
                while !world.is_done() {
                    world.step(&send).unwrap();
                }
                world.ledger().delivered
            })
            .sum()
    };
    let clear = run(Vec::new());
    let jammed = run(vec![jam]);
    assert!(jammed <= clear, "{jammed} > {clear}");
}
