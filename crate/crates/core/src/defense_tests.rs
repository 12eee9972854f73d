use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::federation::{fedavg, Role};
use crate::neural::{chain_shapes, FlatParams};
use crate::sim_env::observation_dim;

fn flat(values: Vec<f64>) -> FlatParams {
    let d = values.len();
    FlatParams::new(chain_shapes(&[d - 1, 1]), values).unwrap()
}

fn update(agent_id: usize, values: Vec<f64>) -> ModelUpdate {
    ModelUpdate {
        agent_id,
        round: 1,
        role: Role::Actor,
        params: flat(values),
        sample_count: 10,
    }
}

/// Straight-line re-implementation of the anomaly score.
fn oracle_score(target: &[f64], peers: &[Vec<f64>]) -> f64 {
    let norm = |v: &[f64]| {
        let mut s = 0.0;
        for x in v {
            s += x * x;
        }
        s.sqrt()
    };
    let med = |mut xs: Vec<f64>| {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len();
        if n % 2 == 1 {
            xs[n / 2]
        } else {
            (xs[n / 2 - 1] + xs[n / 2]) / 2.0
        }
    };
    let median_norm = med(peers.iter().map(|p| norm(p)).collect());
    let mut center = Vec::new();
    for k in 0..target.len() {
        center.push(med(peers.iter().map(|p| p[k]).collect()));
    }
    let mut dot = 0.0;
    for k in 0..target.len() {
        dot += target[k] * center[k];
    }
    let cos = dot / (norm(target) * norm(&center));
    let a = (norm(target) / median_norm).ln().abs();
    let b = 1.0 - cos;
    if a > b {
        a
    } else {
        b
    }
}

fn benign_round(n: usize, dim: usize, spread: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let base: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    (0..n)
        .map(|_| base.iter().map(|b| b + spread * rng.random_range(-1.0..1.0)).collect())
        .collect()
}

#[test]
fn sign_flip_unit_scale_negates() {
    let u = update(3, vec![1.0, -2.0, 0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p = poison_update(&u, PoisonMode::SignFlipScaled, 1.0, &mut rng);
    assert_eq!(p.params.values(), &[-1.0, 2.0, -0.5]);
    assert_eq!((p.agent_id, p.round, p.role, p.sample_count), (3, 1, Role::Actor, 10));
}

#[test]
fn sign_flip_zero_scale_is_zero() {
    let u = update(0, vec![1.0, -2.0, 0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p = poison_update(&u, PoisonMode::SignFlipScaled, 0.0, &mut rng);
    assert!(p.params.values().iter().all(|&v| v == 0.0));
}

/// For `d` i.i.d. `N(0, s^2)` components the norm concentrates at `s sqrt(d)`
/// with relative spread about `1 / sqrt(2 d)`, here under 1%.
#[test]
fn random_noise_norm_matches_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let values: Vec<f64> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let u = update(0, values);
    let target = 3.0 * u.params.l2_norm();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = poison_update(&u, PoisonMode::RandomNoise, 3.0, &mut rng);
        let rel = (p.params.l2_norm() - target).abs() / target;
        assert!(rel < 0.05, "relative norm error {rel}");
    }
}

#[test]
fn identical_updates_score_zero() {
    let v = vec![0.3, -1.2, 2.0, 0.7];
    let peers: Vec<&[f64]> = (0..5).map(|_| v.as_slice()).collect();
    for p in score_all(&peers) {
        assert_eq!(p.norm_dev, 0.0);
        assert!(p.score() < 1e-12, "{}", p.score());
    }
}

#[test]
fn negated_outlier_closed_form() {
    let v = vec![0.5, -1.0, 2.0, 0.25, 1.5];
    let bad: Vec<f64> = v.iter().map(|x| -10.0 * x).collect();
    let mut peers: Vec<&[f64]> = (0..9).map(|_| v.as_slice()).collect();
    peers.push(&bad);
    let parts = score_all(&peers)[9];
    assert!((parts.direction_dev - 2.0).abs() < 1e-12);
    assert!((parts.norm_dev - 10f64.ln()).abs() < 1e-12);
    assert_eq!(parts.score(), parts.norm_dev);
    assert_eq!(parts.reason(), VerdictReason::NormOutlier);
}

#[test]
fn fewer_than_three_peers_score_zero() {
    let a = vec![1.0, 2.0];
    let b = vec![-50.0, 3.0];
    assert_eq!(score_update(&b, &[&a, &b]), 0.0);
    let outcome = filter_updates(vec![update(0, a), update(1, b)], DEFAULT_THRESHOLD);
    assert_eq!(outcome.accepted.len(), 2);
}

#[test]
fn zero_norm_update_scores_infinite() {
    let a = vec![1.0, 2.0, 3.0];
    let z = vec![0.0; 3];
    assert_eq!(score_update(&z, &[&a, &a, &a, &z]), f64::INFINITY);
}

#[test]
fn benign_scores_match_oracle_and_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let round = benign_round(20, 40, 0.05, &mut rng);
        let views: Vec<&[f64]> = round.iter().map(Vec::as_slice).collect();
        let scores = score_all(&views);
        for (u, parts) in round.iter().zip(&scores) {
            let expected = oracle_score(u, &round);
            assert!((parts.score() - expected).abs() < 1e-12);
            assert!(parts.score() < DEFAULT_THRESHOLD);
            assert!((score_update(u, &views) - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn infinite_threshold_accepts_all() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let round = benign_round(6, 5, 3.0, &mut rng);
    let updates: Vec<_> = round.into_iter().enumerate().map(|(i, v)| update(i, v)).collect();
    let outcome = filter_updates(updates, f64::INFINITY);
    assert_eq!(outcome.accepted.len(), 6);
    assert!(!outcome.fallback);
    assert!(outcome.verdicts.iter().all(|v| v.reason == VerdictReason::Ok));
}

#[test]
fn zero_threshold_falls_back_to_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let round = benign_round(7, 6, 0.3, &mut rng);
    let views: Vec<&[f64]> = round.iter().map(Vec::as_slice).collect();
    let scores: Vec<f64> = score_all(&views).iter().map(ScoreParts::score).collect();
    let best = (0..scores.len())
        .min_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap())
        .unwrap();
    let updates: Vec<_> = round.iter().cloned().enumerate().map(|(i, v)| update(i, v)).collect();
    let outcome = filter_updates(updates, 0.0);
    assert!(outcome.fallback);
    assert_eq!(outcome.accepted.len(), 1);
    assert_eq!(outcome.accepted[0].agent_id, best);
    for v in &outcome.verdicts {
        assert_eq!(v.accepted, v.agent_id == best);
    }
}

#[test]
fn verdict_accepted_iff_below_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut round = benign_round(10, 8, 0.4, &mut rng);
    round[2] = round[2].iter().map(|x| 4.0 * x).collect();
    let updates: Vec<_> = round.into_iter().enumerate().map(|(i, v)| update(i, v)).collect();
    let outcome = filter_updates(updates, DEFAULT_THRESHOLD);
    assert!(!outcome.fallback);
    for v in &outcome.verdicts {
        assert!(v.score >= 0.0);
        assert_eq!(v.accepted, v.score <= DEFAULT_THRESHOLD);
        assert_eq!(v.accepted, v.reason == VerdictReason::Ok);
    }
    assert_eq!(outcome.verdicts[2].reason, VerdictReason::NormOutlier);
}

#[test]
fn eighteen_benign_two_flipped() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let round = benign_round(20, 50, 0.05, &mut rng);
    let mut updates: Vec<_> = round.into_iter().enumerate().map(|(i, v)| update(i, v)).collect();
    for a in [4, 13] {
        updates[a] = poison_update(&updates[a], PoisonMode::SignFlipScaled, 10.0, &mut rng);
    }
    let outcome = filter_updates(updates, DEFAULT_THRESHOLD);
    let rejected: Vec<usize> = outcome.verdicts.iter().filter(|v| !v.accepted).map(|v| v.agent_id).collect();
    assert_eq!(rejected, vec![4, 13]);
    assert_eq!(outcome.accepted.len(), 18);
}

#[test]
fn filter_is_neutral_without_attackers() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let round = benign_round(8, 30, 0.05, &mut rng);
        let updates: Vec<_> = round.into_iter().enumerate().map(|(i, v)| update(i, v)).collect();
        let all = fedavg(&updates).unwrap();
        let dispersion = updates
            .iter()
            .map(|u| {
                u.params
                    .values()
                    .iter()
                    .zip(all.values())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        let kept = filter_updates(updates, DEFAULT_THRESHOLD).accepted;
        let filtered = fedavg(&kept).unwrap();
        let shift = filtered
            .values()
            .iter()
            .zip(all.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(shift < dispersion);
    }
}

#[test]
fn attackers_are_distinct_and_sorted() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ids = select_attackers(20, 4, &mut rng);
    assert_eq!(ids.len(), 4);
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
    assert!(ids.iter().all(|&i| i < 20));
    let cfg = AttackConfig {
        poison_fraction: 0.1,
        ..AttackConfig::default()
    };
    assert_eq!(cfg.attacker_count(8), 1);
    assert_eq!(cfg.attacker_count(20), 2);
}

#[test]
fn attack_config_names_bad_key() {
    let cfg = AttackConfig {
        poison_scale: 0.0,
        ..AttackConfig::default()
    };
    assert!(cfg.validate().unwrap_err().to_string().contains("attack.poison_scale"));
    assert_eq!("SIGN_FLIP_SCALED".parse::<PoisonMode>().unwrap(), PoisonMode::SignFlipScaled);
    assert_eq!(PoisonMode::RandomNoise.to_string().parse::<PoisonMode>().unwrap(), PoisonMode::RandomNoise);
}

#[test]
fn jam_schedule_is_periodic() {
    let attack = AttackConfig {
        jam_enabled: true,
        jam_period: 20,
        jam_duration: 10,
        ..AttackConfig::default()
    };
    let env = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let events = jam_schedule(&attack, &env, &mut rng);
    assert_eq!(events.len(), 5);
    for (k, e) in events.iter().enumerate() {
        assert_eq!(e.start_step, 10 + 20 * k);
        assert_eq!(e.end_step, e.start_step + 9);
        assert!(e.center.iter().all(|c| (0.0..=env.area_km).contains(c)));
    }
    let off = AttackConfig::default();
    assert!(jam_schedule(&off, &env, &mut rng).is_empty());
}

#[test]
fn zero_epsilon_is_identity() {
    let obs = Observation::new(vec![0.5; observation_dim()]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(perturb_observation(&obs, 0.0, &mut rng), obs);
}

#[test]
fn perturbation_stays_in_unit_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for fill in [0.0, 1.0, 0.97] {
        let obs = Observation::new(vec![fill; observation_dim()]).unwrap();
        for _ in 0..200 {
            let p = perturb_observation(&obs, 0.1, &mut rng);
            assert!(p.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

/// Mid-box entries never clamp, so deviations are `U(-eps, eps)`: mean 0 and
/// standard deviation `eps / sqrt(3)`.
#[test]
fn perturbation_moments_match_uniform() {
    let eps = 0.1;
    let obs = Observation::new(vec![0.5; observation_dim()]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let draws = 100_000 / observation_dim() + 1;
    let mut devs = Vec::with_capacity(draws * observation_dim());
    for _ in 0..draws {
        let p = perturb_observation(&obs, eps, &mut rng);
        devs.extend(p.as_slice().iter().map(|v| v - 0.5));
    }
    let n = devs.len() as f64;
    let mean = devs.iter().sum::<f64>() / n;
    let sd = eps / 3f64.sqrt();
    assert!(mean.abs() < 3.0 * sd / n.sqrt(), "mean {mean}");
    let var = devs.iter().map(|d| d * d).sum::<f64>() / n;
    assert!((var.sqrt() - sd).abs() / sd < 0.01);
    assert!(devs.iter().all(|d| d.abs() <= eps));
}
