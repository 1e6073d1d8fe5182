use convexdiv::ecdf::integral_h_f_dg;
use convexdiv::oracle::{jensen_gap, AnalyticCdf};
use convexdiv::{
    k_sample_statistic, polynomial_generator, power_generator, tau_statistic, two_sample_statistic,
    exp_sq_generator, simulate_null, CdfConvention, Sample, Statistic, WeightVector,
};
use proptest::prelude::*;

fn sample_strategy(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..max)
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ecdf_is_monotone_and_bounded(xs in sample_strategy(40), probes in prop::collection::vec(-60.0f64..60.0, 2..20)) {
        let x = Sample::new("x", xs).unwrap();
        let mut probes = probes;
        probes.sort_by(f64::total_cmp);
        for conv in [CdfConvention::RightContinuous, CdfConvention::Mid] {
            let f = x.ecdf(conv);
            let vals: Vec<f64> = probes.iter().map(|&p| f.eval(p).unwrap()).collect();
            prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let f = x.ecdf(CdfConvention::RightContinuous);
        prop_assert_eq!(f.eval(x.sorted()[x.len() - 1]).unwrap(), 1.0);
        prop_assert_eq!(f.eval(x.sorted()[0] - 1.0).unwrap(), 0.0);
    }

    #[test]
    fn h_integral_is_bounded(xs in sample_strategy(30), ys in sample_strategy(30), m in 2u32..6) {
        let h = power_generator(m).unwrap();
        let x = Sample::new("x", xs).unwrap();
        let y = Sample::new("y", ys).unwrap();
        let v = integral_h_f_dg(&h, &x.ecdf(CdfConvention::RightContinuous), &y.ecdf(CdfConvention::RightContinuous));
        prop_assert!((0.0..=h.eval(1.0)).contains(&v));
    }

    #[test]
    fn self_integral_is_order_statistic_mean(xs in sample_strategy(40)) {
        let xs = distinct(xs);
        let h = polynomial_generator(&[0.5, 1.0, 2.0]).unwrap();
        let x = Sample::new("x", xs).unwrap();
        let f = x.ecdf(CdfConvention::RightContinuous);
        let n = x.len() as f64;
        let expected = (1..=x.len()).map(|i| h.eval(i as f64 / n)).sum::<f64>() / n;
        prop_assert_eq!(integral_h_f_dg(&h, &f, &f), expected);
    }

    #[test]
    fn statistics_are_rank_invariant(xs in sample_strategy(25), ys in sample_strategy(25), zs in sample_strategy(10)) {
        let h = power_generator(3).unwrap();
        let xi = exp_sq_generator(0.7).unwrap();
        let raw = [Sample::new("x", xs).unwrap(), Sample::new("y", ys).unwrap(), Sample::new("z", zs).unwrap()];
        let w = WeightVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let maps: [fn(f64) -> f64; 3] = [|v| (v / 10.0).exp(), f64::atan, |v| v * v * v + v];
        for map in maps {
            let moved: Vec<Sample> = raw.iter().map(|s| s.map(map).unwrap()).collect();
            prop_assert_eq!(
                two_sample_statistic(&h, &raw[0], &raw[1]).value.to_bits(),
                two_sample_statistic(&h, &moved[0], &moved[1]).value.to_bits()
            );
            prop_assert_eq!(
                k_sample_statistic(&h, &raw, &w).unwrap().value.to_bits(),
                k_sample_statistic(&h, &moved, &w).unwrap().value.to_bits()
            );
            prop_assert_eq!(
                tau_statistic(&xi, &raw[0], &raw[1]).value.to_bits(),
                tau_statistic(&xi, &moved[0], &moved[1]).value.to_bits()
            );
        }
    }

    #[test]
    fn two_sample_is_symmetric(xs in sample_strategy(30), ys in sample_strategy(30)) {
        let h = polynomial_generator(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        let x = Sample::new("x", xs).unwrap();
        let y = Sample::new("y", ys).unwrap();
        prop_assert_eq!(
            two_sample_statistic(&h, &x, &y).value.to_bits(),
            two_sample_statistic(&h, &y, &x).value.to_bits()
        );
    }

    #[test]
    fn k2_uniform_is_quarter_of_two_sample(xs in sample_strategy(30), ys in sample_strategy(30)) {
        let h = power_generator(2).unwrap();
        let x = Sample::new("x", xs).unwrap();
        let y = Sample::new("y", ys).unwrap();
        let two = two_sample_statistic(&h, &x, &y).value;
        let k = k_sample_statistic(&h, &[x, y], &WeightVector::uniform(2).unwrap()).unwrap().value;
        prop_assert!((k - two / 4.0).abs() < 1e-14);
    }

    #[test]
    fn statistic_value_is_raw_minus_centering(xs in sample_strategy(20), ys in sample_strategy(20)) {
        let h = power_generator(2).unwrap();
        let v = two_sample_statistic(&h, &Sample::new("x", xs).unwrap(), &Sample::new("y", ys).unwrap());
        prop_assert_eq!(v.value, v.raw_functional - v.centering_constant);
    }

    /// Finite-k Jensen step: Σp_j h(u_j) ≥ h(Σp_j u_j) with equality only at equal u_j.
    #[test]
    fn finite_jensen(us in prop::collection::vec(0.0f64..=1.0, 2..8), raw_w in prop::collection::vec(0.05f64..1.0, 8)) {
        let h = power_generator(2).unwrap();
        let k = us.len();
        let total: f64 = raw_w[..k].iter().sum();
        let p: Vec<f64> = raw_w[..k].iter().map(|w| w / total).collect();
        let lhs: f64 = p.iter().zip(&us).map(|(p, u)| p * h.eval(*u)).sum();
        let mean: f64 = p.iter().zip(&us).map(|(p, u)| p * u).sum();
        let gap = lhs - h.eval(mean);
        prop_assert!(gap >= -1e-15);
        let spread = us.iter().cloned().fold(f64::MIN, f64::max) - us.iter().cloned().fold(f64::MAX, f64::min);
        if spread > 1e-3 {
            prop_assert!(gap > 0.0);
        }
    }

    #[test]
    fn p_value_is_bounded_and_monotone(seed in any::<u64>(), a in -1.0f64..2.0, b in -1.0f64..2.0) {
        let stat = Statistic::two_sample(power_generator(2).unwrap());
        let t = simulate_null(&stat, &[4, 5], 50, seed).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (plo, phi) = (t.p_value(lo), t.p_value(hi));
        prop_assert!(plo >= phi);
        for p in [plo, phi] {
            prop_assert!((1.0 / 51.0..=1.0).contains(&p));
        }
    }
}

#[test]
fn jensen_gap_positive_for_mixed_families() {
    let h = power_generator(2).unwrap();
    let cdfs = [
        AnalyticCdf::logistic(0.0, 1.0).unwrap(),
        AnalyticCdf::logistic(0.5, 1.0).unwrap(),
        AnalyticCdf::logistic(0.0, 1.5).unwrap(),
    ];
    let w = WeightVector::new(vec![0.5, 0.3, 0.2]).unwrap();
    assert!(jensen_gap(&h, &cdfs, &w).unwrap() > 1e-6);
}
