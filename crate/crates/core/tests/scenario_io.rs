use mgcoop::scenario::{
    bundled, episode_log_to_string, generate_synthetic, load_config, load_network, parse_episode_log, parse_profile,
    profile_to_string, save_network, EpisodeLogRow, ScenarioProfile, SyntheticSpec,
};
use proptest::prelude::*;

#[test]
fn thirty_day_load_mean_matches_spec() {
    let spec = SyntheticSpec { days: 30, load_mean_kw: vec![600.0, 250.0], load_noise: 0.05, ..Default::default() };
    let p = generate_synthetic(&spec, 11).unwrap();
    assert_eq!(p.steps(), 30 * 96);
    for (mg, target) in [(0, 600.0), (1, 250.0)] {
        // independent sample mean over the whole horizon
        let mean = p.load_kw[mg].iter().sum::<f64>() / p.steps() as f64;
        assert!((mean - target).abs() <= 0.01 * target, "mg {mg}: mean {mean} vs {target}");
    }
}

#[test]
fn demand_has_two_daily_peaks() {
    let spec = SyntheticSpec { load_noise: 0.0, ..Default::default() };
    let p = generate_synthetic(&spec, 0).unwrap();
    let l = &p.load_kw[0];
    let n = l.len();
    let local_max = (0..n).filter(|&t| l[t] > l[(t + n - 1) % n] && l[t] >= l[(t + 1) % n]).count();
    assert_eq!(local_max, 2);
}

#[test]
fn bundled_network_files_round_trip() {
    for name in ["feeder33.toml", "mg13_network.toml"] {
        let net = load_network(bundled(name)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        save_network(&net, &path).unwrap();
        assert_eq!(load_network(&path).unwrap(), net);
    }
}

#[test]
fn bundled_configs_validate() {
    for name in ["default_config.toml", "desk_config.toml", "shock_config.toml"] {
        let cfg = load_config(bundled(name), &[]).unwrap();
        assert_eq!(cfg.scenario.microgrids.len(), 2, "{name}");
    }
}

fn profile_strategy() -> impl Strategy<Value = ScenarioProfile> {
    (1usize..4, 1usize..12).prop_flat_map(|(n, t)| {
        (
            prop::collection::vec(0.0f64..1.0, t),
            prop::collection::vec(prop::collection::vec(0.0f64..2000.0, t), n),
            prop::collection::vec(prop::collection::vec(0.0f64..=1.0, t), n),
        )
            .prop_map(|(wholesale_price, load_kw, irradiance)| ScenarioProfile {
                dt_h: 0.25,
                wholesale_price,
                load_kw,
                irradiance,
                events: vec![],
            })
    })
}

proptest! {
    #[test]
    fn profile_text_round_trips(p in profile_strategy()) {
        let back = parse_profile(&profile_to_string(&p), "p").unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn episode_log_round_trips(
        vals in prop::collection::vec((any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e6f64..1e6), 0..20),
        n in 1usize..4,
    ) {
        let rows: Vec<EpisodeLogRow> = vals
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| EpisodeLogRow {
                episode: k,
                reward: a,
                q_hat: b,
                ape: (a - b).abs(),
                price_mg: vec![b; n],
                pcc_kw_mg: vec![a; n],
                p_w_kw: -b,
                welfare: a / 3.0,
            })
            .collect();
        let text = episode_log_to_string(&rows, n).unwrap();
        prop_assert_eq!(parse_episode_log(&text, "log").unwrap(), (n, rows));
    }
}
