use coexist_core::baselines::{BaselineKind, evaluate_monolithic, heuristic_joint, merge_bs_action, split_bs_action};
use coexist_core::channel::{LinkGeometry, LosModel, PathlossModel, los_probability, pathloss_db};
use coexist_core::dynamics::{DynamicsConfig, advance, sample_stationary_population};
use coexist_core::env::observation::action_mask;
use coexist_core::env::{Environment, JointAction, PopulationMode};
use coexist_core::partition::SrbPartition;
use coexist_core::rng;
use coexist_core::system::{PartitionStyle, SystemConfig};
use coexist_core::trainer::Multipliers;
use num_complex::Complex;
use proptest::prelude::*;
use rand::Rng;

fn env(seed: u64) -> Environment<f64> {
    Environment::new(SystemConfig::desk(), DynamicsConfig::default(), PopulationMode::Training, seed, 0).unwrap()
}

/// Legal random action where each BS idles subchannels with probability `idle`.
fn random_joint(env: &Environment<f64>, idle: f64, seed: u64) -> JointAction {
    let mut r = rng::stream(seed, 99);
    let phys = env.physics();
    let bs_actions: Vec<Vec<usize>> = (0..phys.n_bs)
        .map(|n| {
            let mask = action_mask(phys, env.state(), n);
            let users: Vec<usize> = (1..mask.len()).filter(|&c| mask[c]).collect();
            (0..phys.subchannels)
                .map(|_| if r.random::<f64>() < idle { 0 } else { users[r.random_range(0..users.len())] })
                .collect()
        })
        .collect();
    coexist_core::baselines::joint_from_bs_actions(&phys.partition, &bs_actions).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pathloss_monotone_in_distance(
        intercept in 60.0f64..150.0,
        slope in 0.0f64..60.0,
        d1 in 1.0f64..5_000.0,
        extra in 0.0f64..5_000.0,
    ) {
        let model = PathlossModel { intercept_db: intercept, slope_db_per_decade: slope, ..PathlossModel::terrestrial_default() };
        let at = |d: f64| {
            let g = LinkGeometry::terrestrial([0.0, 0.0, 0.0], [d, 0.0, 0.0]);
            pathloss_db(&g, &model).unwrap()
        };
        prop_assert!(at(d1 + extra) >= at(d1));
    }

    #[test]
    fn los_probability_monotone_in_elevation(e1 in 0.0f64..90.0, step in 0.0f64..90.0) {
        let m = LosModel::default();
        let e2 = (e1 + step).min(90.0);
        let (p1, p2) = (los_probability(e1, &m).unwrap(), los_probability(e2, &m).unwrap());
        prop_assert!((0.0..=1.0).contains(&p1));
        prop_assert!(p2 >= p1);
    }

    #[test]
    fn aligned_partition_covers_and_aligns(n_bs in 1usize..5, srbs in 1usize..7, size in 1usize..9) {
        let f = srbs * size;
        let p = SrbPartition::new(n_bs, f, srbs, PartitionStyle::Contiguous).unwrap();
        prop_assert!(p.is_frequency_aligned());
        for n in 0..n_bs {
            let mut all: Vec<usize> = (0..srbs).flat_map(|m| p.block(n, m).to_vec()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..f).collect::<Vec<_>>());
            for m in 0..srbs {
                prop_assert_eq!(p.block(n, m), p.block(0, m));
            }
        }
    }

    #[test]
    fn step_outcome_invariants(seed in any::<u64>(), idle in 0.0f64..1.0) {
        let e = env(seed);
        let joint = random_joint(&e, idle, seed);
        let out = e.evaluate(&joint).unwrap();
        let phys = e.physics();
        let sum: f64 = out.group_rewards.iter().sum();
        prop_assert!((out.reward - sum).abs() <= 1e-12 * out.reward.max(1.0));
        prop_assert!(out.rates.iter().all(|&r| r >= 0.0));
        for n in 0..phys.n_bs {
            let total = out.powers.bs_total(n);
            prop_assert!(total <= phys.p_max + 4.0 * f64::EPSILON * phys.p_max);
            let full = (0..phys.srbs).all(|m| joint.agent(n, m, phys.srbs).active_subchannels() > 0);
            prop_assert_eq!((total - phys.p_max).abs() <= 4.0 * f64::EPSILON * phys.p_max, full);
        }
        for (i, &p) in out.powers.power.iter().enumerate() {
            prop_assert!(p <= phys.p_max);
            prop_assert_eq!(p > 0.0, out.powers.user[i].is_some());
        }
        let s = e.state();
        for j in 0..s.active.len() {
            prop_assert!(out.costs[j] >= 0.0);
            if !s.active[j] || out.user_rates[j] >= s.eta[j] {
                prop_assert_eq!(out.costs[j], 0.0);
            }
        }
    }

    #[test]
    fn other_group_gains_leave_group_rates_unchanged(seed in any::<u64>(), m in 0usize..3, scale in 0.01f64..100.0) {
        let e = env(seed);
        let joint = random_joint(&e, 0.3, seed);
        let phys = e.physics();
        let s = e.state();
        let base = phys.evaluate(&s.channel, &s.active, &s.eta, &joint).unwrap();
        let mut ch = s.channel.clone();
        for other in (0..phys.srbs).filter(|&o| o != m) {
            for &f in phys.partition.block(0, other) {
                for l in 0..phys.n_bs {
                    for j in 0..ch.user_slots {
                        let h = ch.coefficients[ch.index(l, j, f)];
                        ch.set(l, j, f, h * Complex::new(scale.sqrt(), 0.0));
                    }
                }
            }
        }
        let moved = phys.evaluate(&ch, &s.active, &s.eta, &joint).unwrap();
        prop_assert_eq!(base.group_rewards[m].to_bits(), moved.group_rewards[m].to_bits());
        for n in 0..phys.n_bs {
            for &f in phys.partition.block(n, m) {
                let i = n * phys.subchannels + f;
                prop_assert_eq!(base.rates[i].to_bits(), moved.rates[i].to_bits());
            }
        }
    }

    #[test]
    fn adapter_and_decomposed_paths_agree(seed in any::<u64>(), idle in 0.0f64..1.0) {
        let e = env(seed);
        let joint = random_joint(&e, idle, seed);
        let phys = e.physics();
        let bs_actions: Vec<Vec<usize>> = (0..phys.n_bs)
            .map(|n| {
                let srb: Vec<_> = (0..phys.srbs).map(|m| joint.agent(n, m, phys.srbs).clone()).collect();
                merge_bs_action(&phys.partition, n, &srb)
            })
            .collect();
        for (n, a) in bs_actions.iter().enumerate() {
            let split = split_bs_action(&phys.partition, n, a);
            for (m, s) in split.iter().enumerate() {
                prop_assert_eq!(s, joint.agent(n, m, phys.srbs));
            }
        }
        let direct = e.evaluate(&joint).unwrap();
        let adapted = evaluate_monolithic(&e, &bs_actions).unwrap();
        prop_assert_eq!(direct, adapted);
    }

    #[test]
    fn heuristics_are_legal(seed in any::<u64>()) {
        let e = env(seed);
        let mut r = rng::stream(seed, 7);
        for kind in [BaselineKind::FullActivationUniform, BaselineKind::RandomAssignment] {
            let joint = heuristic_joint(kind, &e, &mut r).unwrap();
            prop_assert!(e.evaluate(&joint).is_ok());
        }
    }

    #[test]
    fn population_stays_bounded(seed in any::<u64>(), rate in 0.0f64..30.0, speed in 0.0f64..50.0) {
        let cfg = DynamicsConfig { arrival_rate: rate, walk_speed: speed, ..DynamicsConfig::default() };
        let mut r = rng::stream(seed, 1);
        let area = [300.0, 200.0];
        let mut pop = sample_stationary_population(&mut r, 2, 4, area, 1e6, &cfg);
        for _ in 0..200 {
            advance(&mut pop, 1.0, &mut r, &cfg).unwrap();
            for bs in 0..2 {
                prop_assert!(pop.active_at(bs) <= 4);
            }
            for u in &pop.users {
                prop_assert!((0.0..=area[0]).contains(&u.position[0]));
                prop_assert!((0.0..=area[1]).contains(&u.position[1]));
                if u.active {
                    prop_assert!(u.dwell_remaining > 0.0);
                }
            }
        }
    }

    #[test]
    fn multipliers_stay_feasible(costs in prop::collection::vec(prop::collection::vec(-5.0f64..50.0, 4), 1..40)) {
        let mut m = Multipliers::<f64>::new(4, 0.7, 10.0);
        for c in &costs {
            m.update(c).unwrap();
            prop_assert!(m.lambda.iter().all(|&l| (0.0..=10.0).contains(&l)));
        }
    }

    #[test]
    fn multipliers_rise_under_violation(costs in prop::collection::vec(prop::collection::vec(1e-6f64..50.0, 3), 1..40)) {
        let mut m = Multipliers::<f64>::new(3, 1e-3, 100.0);
        let mut prev = m.lambda.clone();
        for c in &costs {
            m.update(c).unwrap();
            for (a, b) in prev.iter().zip(&m.lambda) {
                prop_assert!(b >= a);
            }
            prev = m.lambda.clone();
        }
    }
}
