use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use convexdiv::nulldist::PowerEstimate;
use convexdiv::{
    parse_generator, power_generator, power_study, run_test, two_sample_statistic, Alternative,
    LogConvexGenerator, PowerOptions, Sample, Statistic, TestOptions,
};

fn uniforms(rng: &mut ChaCha8Rng, n: usize, map: impl Fn(f64) -> f64) -> Sample {
    Sample::new("u", (0..n).map(|_| map(rng.random::<f64>())).collect()).unwrap()
}

#[test]
fn large_sample_statistic_approaches_population_gap() {
    // F(x) = x and G(x) = x² on [0, 1]; population gap is 1/30
    let h = power_generator(2).unwrap();
    let values: Vec<f64> = (0..5u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = uniforms(&mut rng, 10_000, |u| u);
            let y = uniforms(&mut rng, 10_000, f64::sqrt);
            two_sample_statistic(&h, &x, &y).value
        })
        .collect();
    for v in &values {
        assert!((v - 1.0 / 30.0).abs() < 0.01, "{values:?}");
    }
}

fn study(alt: Alternative) -> Vec<PowerEstimate> {
    let stat = Statistic::two_sample(power_generator(2).unwrap());
    let options = PowerOptions {
        null_replicates: 999,
        power_replicates: 2000,
        seed: 8,
        levels: vec![0.05],
        workers: None,
    };
    power_study(&stat, alt, &[30, 30], &options).unwrap().estimates
}

#[test]
fn power_study_null_and_monotonicity() {
    let null = study(Alternative::Shift(0.0));
    let e = &null[0];
    assert!((e.rejection_rate - 0.05).abs() <= 3.0 * (0.05f64 * 0.95 / 2000.0).sqrt(), "{e:?}");

    // σ = 1 leaves every draw untouched
    assert_eq!(study(Alternative::Scale(1.0)), null);

    let small = study(Alternative::Shift(0.25))[0].rejection_rate;
    let large = study(Alternative::Shift(0.5))[0].rejection_rate;
    assert!(large > small && small > e.rejection_rate, "{small} {large}");

    let lehmann = study(Alternative::Lehmann(3.0))[0].rejection_rate;
    assert!(lehmann > 0.5);
}

#[test]
fn large_shift_is_detected() {
    let stat = Statistic::two_sample(power_generator(2).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = uniforms(&mut rng, 50, |u| u + 3.0);
    let y = uniforms(&mut rng, 50, |u| u);
    let options = TestOptions {
        replicates: 999,
        seed: 1,
        ..TestOptions::default()
    };
    let report = run_test(&stat, &[x, y], &options).unwrap();
    assert!(report.p_value <= 0.01);
    assert_eq!(report.p_value, 0.001);
    assert!(report.critical_values.iter().all(|c| c.reject));
    assert!(report.warnings.is_empty());
}

#[test]
fn reports_are_reproducible_and_flag_problems() {
    let stat = Statistic::two_sample(power_generator(2).unwrap());
    let x = Sample::new("x", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let y = Sample::new("y", vec![2.0, 5.0, 6.0]).unwrap();
    let options = TestOptions {
        replicates: 99,
        seed: 3,
        levels: vec![0.05, 1e-9],
        workers: Some(2),
        permutation: false,
    };
    let a = run_test(&stat, &[x.clone(), y.clone()], &options).unwrap();
    let b = run_test(&stat, &[x.clone(), y.clone()], &options).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.statistic.tie_count, 1);
    assert!(a.warnings.iter().any(|w| w.contains("continuous-distribution")));
    assert!(a.warnings.iter().any(|w| w.contains("table too small")));
    // levels come back sorted; the tiny one is clamped to the top order statistic
    assert_eq!(a.critical_values[0].critical.rank, 99);
    assert_eq!(a.critical_values[1].critical.rank, 95);
    assert!(!a.critical_values[1].critical.clamped);

    let perm = run_test(&stat, &[x, y], &TestOptions { permutation: true, ..options }).unwrap();
    assert_eq!(perm.table.source, "permutation");
}

#[test]
fn critical_values_decrease_with_level() {
    let stat = Statistic::two_sample(power_generator(3).unwrap());
    let table = convexdiv::simulate_null(&stat, &[8, 9], 500, 12).unwrap();
    let levels = [0.001, 0.01, 0.05, 0.1, 0.25, 0.5];
    let cvs: Vec<f64> = levels.iter().map(|&a| table.critical_value(a).unwrap().value).collect();
    assert!(cvs.windows(2).all(|w| w[0] >= w[1]), "{cvs:?}");
}

#[test]
fn unvalidated_generators_are_flagged() {
    let xi = LogConvexGenerator::from_fn_unchecked("exp", |u: f64| u.exp()).unwrap();
    let stat = Statistic::tau(xi);
    let x = Sample::new("x", vec![0.1, 0.5, 0.9]).unwrap();
    let y = Sample::new("y", vec![0.2, 0.3]).unwrap();
    let report = run_test(
        &stat,
        &[x, y],
        &TestOptions {
            replicates: 50,
            ..TestOptions::default()
        },
    )
    .unwrap();
    assert!(!report.statistic.characterization_guaranteed);
    assert!(report.warnings.iter().any(|w| w.contains("characterization not guaranteed")));
}

#[test]
fn k_sample_and_tau_run_end_to_end() {
    let h = parse_generator("bernstein:power:2:6").unwrap().into_convex().unwrap();
    let stat = Statistic::k_sample(h, convexdiv::WeightVector::uniform(3).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let samples = [
        uniforms(&mut rng, 12, |u| u),
        uniforms(&mut rng, 15, |u| u),
        uniforms(&mut rng, 10, |u| u + 0.8),
    ];
    let report = run_test(
        &stat,
        &samples,
        &TestOptions {
            replicates: 499,
            seed: 4,
            ..TestOptions::default()
        },
    )
    .unwrap();
    assert!(report.p_value < 0.05, "{}", report.p_value);
    assert_eq!(report.table.sample_sizes, vec![12, 15, 10]);

    let xi = parse_generator("expsq:1.5").unwrap().into_log_convex().unwrap();
    let report = run_test(
        &Statistic::tau(xi),
        &samples[..2],
        &TestOptions {
            replicates: 199,
            seed: 4,
            ..TestOptions::default()
        },
    )
    .unwrap();
    assert!(report.p_value > 0.0 && report.p_value <= 1.0);
}
