use proptest::prelude::*;

use super::plot::{curve_csv, emit_plot, moving_average, parse_curve_csv, Series};
use super::*;

#[test]
fn convergence_needs_consecutive_checkpoints() {
    let cp = [(0, -10.0), (500, 96.0), (1000, 80.0), (1500, 95.0), (2000, 99.0), (2500, 97.0)];
    assert_eq!(converged_at(&cp, 100.0, 0.05, 3), Some(1500));
    assert_eq!(converged_at(&cp, 100.0, 0.05, 1), Some(500));
    assert_eq!(converged_at(&cp, 100.0, 0.05, 4), None);
    // negative reference: threshold moves down by |ref|
    assert_eq!(converged_at(&[(0, -105.0), (10, -104.0)], -100.0, 0.05, 2), Some(0));
}

#[test]
fn median_ranks_missing_values_last() {
    assert_eq!(median(&[Some(3), None, Some(1)]), Some(3.0));
    assert_eq!(median(&[Some(3), None, None]), None);
    assert_eq!(median(&[Some(2), Some(4)]), Some(3.0));
    assert_eq!(median(&[]), None);
}

#[test]
fn first_reaching_is_one_based() {
    assert_eq!(first_reaching(&[0.0, 900.0, 1000.0, 1200.0], 1000.0), Some(3));
    assert_eq!(first_reaching(&[0.0], 1.0), None);
}

#[test]
fn curve_csv_round_trips_through_the_parser() {
    let r = [1.0, -2.0, 3.5];
    let pts = parse_curve_csv(&curve_csv(&r)).unwrap();
    assert_eq!(pts, vec![(1.0, 1.0), (2.0, -0.5), (3.0, 2.5 / 3.0)]);
    assert!(parse_curve_csv("episode,reward\n1,2\n").is_err());
    assert!(parse_curve_csv("episode,reward,moving_average\n1,x,2\n").is_err());
    assert!(parse_curve_csv("episode,reward,moving_average\n").is_err());
}

#[test]
fn plot_has_one_polyline_per_series_and_is_deterministic() {
    let series: Vec<Series> = (0..4)
        .map(|m| Series::from_rewards(format!("Method {m}"), &(0..50).map(|e| (e * m) as f64).collect::<Vec<_>>()))
        .collect();
    let a = emit_plot(&series, "four").unwrap();
    assert_eq!(a.matches("<polyline").count(), 4);
    assert_eq!(a, emit_plot(&series, "four").unwrap());
    assert!(emit_plot(&[], "none").is_err());
}

#[test]
fn flat_curve_is_a_horizontal_polyline() {
    let svg = emit_plot(&[Series::from_rewards("flat", &[0.0; 30])], "flat").unwrap();
    let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
    assert!(ys.windows(2).all(|w| w[0] == w[1]), "{pts}");
}

#[test]
fn plot_escapes_labels() {
    let svg = emit_plot(&[Series::from_rewards("a<b & c", &[1.0, 2.0])], "t").unwrap();
    assert!(svg.contains("a&lt;b &amp; c"));
}

#[test]
fn presets_resolve() {
    let p1 = ExperimentConfig::preset(Case::Case1).plan().unwrap();
    assert_eq!((p1.budget, p1.target_env.width, p1.target_env.horizon), (100_000, 9, 40));
    assert_eq!(p1.source_data, DataSource::Collect { episodes: 10_000, rule: LabelingRule::RewardAbove { threshold: 0.0 } });
    let p2 = ExperimentConfig::preset(Case::Case2).plan().unwrap();
    assert_eq!((p2.budget, p2.source_env.width, p2.target_env.width), (30_000, 5, 7));
    assert_eq!(p2.reward_mark, Some(1000.0));
    assert!(matches!(ExperimentConfig::preset(Case::Custom).plan(), Err(ExperimentError::Config(_))));
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = ExperimentConfig::preset(Case::Case2);
    cfg.experiment.seeds = vec![4, 5];
    cfg.env.target = Some(case2_target_env());
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn config_rejects_bad_values() {
    let bad = [
        "[experiment]\nseeds = []\n",
        "[experiment]\nmethods = []\n",
        "[experiment]\ntolerance = 1.5\n",
        "[learning]\nalpha = 2.0\n",
        "[pso]\nswarm_size = 1\n",
        "[inference]\nzeta = 0.95\nunknown = 1\n",
        "[experiment]\ncase = \"custom\"\nsource_data = \"/nonexistent.jsonl\"\n",
    ];
    for text in bad {
        let r = ExperimentConfig::from_toml(text).and_then(|c| c.plan());
        assert!(matches!(r, Err(ExperimentError::Config(_))), "{text}: {r:?}");
    }
}

#[test]
fn learning_section_anneals_over_a_fraction_of_the_run() {
    let p = LearningSection::default().params(1000, 3);
    assert_eq!(p.epsilon.anneal_episodes, 500);
    assert_eq!((p.alpha, p.gamma, p.tau, p.seed), (0.8, 0.99, 5, 3));
}

proptest! {
    #[test]
    fn moving_average_matches_direct_mean(values in prop::collection::vec(-100.0f64..100.0, 1..60), w in 1usize..12) {
        let ma = moving_average(&values, w);
        for (i, m) in ma.iter().enumerate() {
            let lo = (i + 1).saturating_sub(w);
            let direct = values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64;
            prop_assert!((m - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn convergence_matches_scan(vals in prop::collection::vec(0.0f64..100.0, 0..20), k in 1usize..4) {
        let cp: Vec<(usize, f64)> = vals.iter().enumerate().map(|(i, &v)| (i * 10, v)).collect();
        let thr = 95.0;
        let expect = (0..cp.len()).find(|&i| i + k <= cp.len() && cp[i..i + k].iter().all(|c| c.1 >= thr)).map(|i| i * 10);
        prop_assert_eq!(converged_at(&cp, 100.0, 0.05, k), expect);
    }
}
