use dp_wilcoxon::experiments::{
    estimate_power, generate_paired_normal, power_sweep, public_wilcoxon_test, subsample_power,
    Epsilon, PowerConfig, PowerEstimate, SubsampleConfig, SweepGrid, TestKind, TestSpec,
};
use dp_wilcoxon::{PairedDataset, Seed, Sidedness};

fn base(test: TestKind, n: usize, trials: usize) -> PowerConfig {
    let mut c = PowerConfig::new(test, n, Epsilon::new(1.0).unwrap(), Seed(31));
    c.trials = trials;
    c
}

fn within(a: &PowerEstimate, b: &PowerEstimate) -> bool {
    // a >= b up to two standard errors of the difference
    a.power + 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt() >= b.power
}

#[test]
fn power_ordering_across_tests() {
    for n in [30, 60, 100] {
        let est = |t| estimate_power(&base(t, n, 2000)).unwrap();
        let public = est(TestKind::Public);
        let new = est(TestKind::New);
        let hu_plus = est(TestKind::TcHuPlus);
        let hp_plus = est(TestKind::TcHpPlus);
        let hu = est(TestKind::TcHu);
        let hp = est(TestKind::TcHp);
        assert!(
            within(&public, &new),
            "n={n}: public {} < new {}",
            public.power,
            new.power
        );
        assert!(
            within(&new, &hu_plus),
            "n={n}: new {} < hu+ {}",
            new.power,
            hu_plus.power
        );
        assert!(
            within(&new, &hp_plus),
            "n={n}: new {} < hp+ {}",
            new.power,
            hp_plus.power
        );
        assert!(
            within(&hu_plus, &hu),
            "n={n}: hu+ {} < hu {}",
            hu_plus.power,
            hu.power
        );
        assert!(
            within(&hp_plus, &hp),
            "n={n}: hp+ {} < hp {}",
            hp_plus.power,
            hp.power
        );
    }
}

#[test]
fn power_monotone_in_n_and_ties() {
    let grid = SweepGrid {
        n: vec![10, 20, 30, 40, 60, 80],
        ..SweepGrid::default()
    };
    let by_n = power_sweep(&grid, &base(TestKind::New, 10, 2000)).unwrap();
    for w in by_n.windows(2) {
        assert!(within(&w[1], &w[0]), "{} -> {}", w[0].power, w[1].power);
    }

    let grid = SweepGrid {
        tie_fraction: vec![0.0, 0.2, 0.4, 0.6, 0.8],
        ..SweepGrid::default()
    };
    for test in [TestKind::New, TestKind::Public, TestKind::TcHuPlus] {
        let by_ties = power_sweep(&grid, &base(test, 60, 2000)).unwrap();
        for w in by_ties.windows(2) {
            assert!(
                within(&w[0], &w[1]),
                "{test}: {} -> {}",
                w[0].power,
                w[1].power
            );
        }
    }
}

#[test]
fn large_n_effect_threshold_matches_public() {
    // smallest effect reaching 80% power, same sidedness for both tests
    let effects: Vec<f64> = (3..=12).map(|i| i as f64 / 100.0).collect();
    let grid = SweepGrid {
        effect: effects.clone(),
        ..SweepGrid::default()
    };
    let threshold = |test| {
        let mut b = base(test, 2500, 2000);
        b.spec.sidedness = Some(Sidedness::TwoSided);
        let est = power_sweep(&grid, &b).unwrap();
        est.iter()
            .position(|e| e.power >= 0.8)
            .expect("grid reaches 80% power")
    };
    let (private, public) = (threshold(TestKind::New), threshold(TestKind::Public));
    assert!(
        private.abs_diff(public) <= 1,
        "private {} vs public {}",
        effects[private],
        effects[public]
    );
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let cfg = base(TestKind::TcHpPlus, 60, 500);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| estimate_power(&cfg).unwrap());
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| estimate_power(&cfg).unwrap());
    assert_eq!(single, many);
}

fn subsample(test: TestKind, n_sub: usize, reps: usize) -> SubsampleConfig {
    SubsampleConfig {
        spec: TestSpec::new(test, Epsilon::new(1.0).unwrap()),
        n_sub,
        reps,
        seed: Seed(41),
    }
}

#[test]
fn subsample_calibration_under_null() {
    let data = generate_paired_normal(5000, 0.0, 0.0, &mut Seed(40).rng()).unwrap();
    let est = subsample_power(&data, &subsample(TestKind::New, 400, 4000)).unwrap();
    assert!((est.power - 0.05).abs() <= 0.01, "{}", est.power);
}

#[test]
fn subsample_strong_effect_agrees_with_public() {
    let data =
        PairedDataset::new((0..2000).map(|i| (0.0, 0.5 + (i % 37) as f64)).collect()).unwrap();
    let private = subsample_power(&data, &subsample(TestKind::New, 400, 500)).unwrap();
    let public = subsample_power(&data, &subsample(TestKind::Public, 400, 500)).unwrap();
    assert!(private.power > 0.95, "{}", private.power);
    assert!((private.power - public.power).abs() <= 0.05);
}

#[test]
fn subsample_rejects_degenerate_inputs() {
    let data = PairedDataset::new(vec![(0.0, 1.0); 10]).unwrap();
    assert!(subsample_power(&data, &subsample(TestKind::New, 10, 0)).is_err());
    let mut bad = subsample(TestKind::New, 10, 5);
    bad.spec.epsilon = Epsilon::Public;
    assert!(subsample_power(&data, &bad).is_err());
}

#[test]
fn public_test_matches_normal_tail_without_ties() {
    // all positive differences 1..=20: w = 210, sigma^2 = 20*21*41/6 = 2870
    let data = PairedDataset::new((1..=20).map(|i| (0.0, i as f64)).collect()).unwrap();
    let r = public_wilcoxon_test(&data, Sidedness::OneSided);
    assert_eq!(r.w, 210.0);
    assert!((r.z - 210.0 / 2870f64.sqrt()).abs() < 1e-12);
    assert!(r.p < 1e-4);
}

#[test]
fn new_test_at_tenth_epsilon_needs_a_few_hundred_rows() {
    let mut cfg = base(TestKind::New, 236, 4000);
    cfg.spec.epsilon = Epsilon::new(0.1).unwrap();
    let est = estimate_power(&cfg).unwrap();
    assert!((est.power - 0.80).abs() <= 0.07, "{}", est.power);
}
