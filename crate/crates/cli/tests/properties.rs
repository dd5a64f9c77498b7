use coexist_cli::RunConfig;
use coexist_cli::metrics::{MetricsRow, MetricsWriter, Phase, SCHEMA_VERSION, read_metrics_file};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e12f64..1e12, Just(0.0), Just(-0.0), Just(f64::MIN_POSITIVE)]
}

prop_compose! {
    fn row()(
        run_id in "[a-z0-9,\" \n-]{0,16}",
        episode in any::<u64>(),
        eval in any::<bool>(),
        v in prop::collection::vec(finite(), 10),
    ) -> MetricsRow {
        MetricsRow {
            schema_version: SCHEMA_VERSION,
            run_id,
            wall_time_s: v[0].abs(),
            episode,
            phase: if eval { Phase::Eval } else { Phase::Train },
            sim_time_s: v[1].abs(),
            mean_shaped_reward: v[2],
            mean_raw_reward: v[3],
            mean_cost: v[4].abs(),
            lambda_mean: v[5].abs(),
            lambda_max: v[6].abs(),
            qos_misses: v[7].abs(),
            throughput_bps: v[8].abs(),
            active_users: v[9].abs(),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_round_trip(rows in prop::collection::vec(row(), 0..8)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path).unwrap();
        for r in &rows {
            w.append(r).unwrap();
        }
        drop(w);
        prop_assert_eq!(read_metrics_file(&path).unwrap(), rows);
    }

    #[test]
    fn system_changes_change_the_hash(
        eta in 0.1f64..10.0,
        k_max in 1usize..12,
        x in 0.0f64..1000.0,
        rho in 0.0f64..0.99,
    ) {
        let base = RunConfig::default();
        let edits: [Box<dyn Fn(&mut RunConfig)>; 4] = [
            Box::new(|c| c.system.eta_mbps = eta),
            Box::new(|c| c.system.k_max = k_max),
            Box::new(|c| c.system.base_stations[0].position_m[0] = x),
            Box::new(|c| c.system.channel.fading_rho = rho),
        ];
        for edit in &edits {
            let mut c = base.clone();
            edit(&mut c);
            prop_assert_eq!(c.system == base.system, c.system_hash() == base.system_hash());
            prop_assert_eq!(c == base, c.config_hash() == base.config_hash());
        }
    }

    #[test]
    fn resolved_config_reparses_to_itself(seed in any::<u64>(), episodes in 0usize..100_000, lr in 1e-7f64..1e-2) {
        let mut c = RunConfig::default();
        c.run.seed = seed;
        c.run.episodes = episodes;
        c.trainer.lr = lr;
        let back = RunConfig::parse(&c.to_toml(), "resolved").unwrap();
        prop_assert_eq!(back.config_hash(), c.config_hash());
        prop_assert_eq!(back, c);
    }
}
