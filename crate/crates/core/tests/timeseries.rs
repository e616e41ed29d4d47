mod common;

use idlepi::timeseries::{
    acf, adf_test, auto_lag, bin_confusion, compare, kolmogorov_survival, ks_two_sample, mackinnon_p, minmax_normalize,
    moving_average, pacf, pearson, quality_bin, quartile_bin_agreement, rmsd, EnergySeries, LagOrder, StatReport,
};
use idlepi::Error;
use proptest::prelude::*;

use common::*;

#[test]
fn moving_average_by_hand() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(moving_average(&x, 2).unwrap(), vec![1.5, 2.5, 3.5, 4.5]);
    assert_eq!(moving_average(&x, 5).unwrap(), vec![3.0]);
    assert!(moving_average(&x, 0).is_err());
    assert!(moving_average(&x, 6).is_err());
}

#[test]
fn normalization_and_bins() {
    assert_eq!(minmax_normalize(&[2.0, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
    assert_eq!(minmax_normalize(&[7.0, 7.0]), vec![0.5, 0.5]);
    let bins: Vec<u8> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&v| quality_bin(v).unwrap())
        .collect();
    assert_eq!(bins, vec![0, 1, 2, 3, 3]);
    assert!(matches!(quality_bin(1.5), Err(Error::OutOfUnitRange(_))));
    assert_eq!(
        quartile_bin_agreement(&[0.1, 0.3, 0.9], &[0.2, 0.6, 0.8]).unwrap(),
        2.0 / 3.0
    );
    let c = bin_confusion(&[0.1, 0.3], &[0.2, 0.6]).unwrap();
    assert_eq!((c[0][0], c[1][2]), (0.5, 0.5));
}

#[test]
fn pearson_reference_value() {
    // scipy.stats.pearsonr([1,2,3,4,5], [2,1,4,3,6])
    let r = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 6.0]).unwrap();
    assert!((r - 0.8219949365267865).abs() < 1e-12);
    assert!(matches!(
        pearson(&[1.0, 1.0], &[1.0, 2.0]),
        Err(Error::UndefinedCorrelation(_))
    ));
    assert!(matches!(pearson(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
}

#[test]
fn compare_scores() {
    let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 10.0).collect();
    let c = compare(&x, &y).unwrap();
    assert!((c.pearson.unwrap() - 1.0).abs() < 1e-12);
    assert!(c.rmsd < 1e-12);
    assert_eq!(c.bin_agreement, 1.0);
    let flat = compare(&[1.0; 10], &y[..10]).unwrap();
    assert_eq!(flat.pearson, None);
}

#[test]
fn kolmogorov_reference_values() {
    // scipy.stats.kstwobign.sf
    for (lambda, want) in [
        (0.5, 9.63945244e-01),
        (1.0, 2.69999672e-01),
        (1.36, 4.94858768e-02),
        (2.0, 6.70925256e-04),
    ] {
        assert!((kolmogorov_survival(lambda) - want).abs() < 1e-8, "{lambda}");
    }
}

#[test]
fn ks_statistic_reference() {
    // scipy.stats.ks_2samp gives D = 0.375 for these samples
    let a = [0.1, 0.5, 0.9, 1.3, 2.0, 2.2, 3.1];
    let b = [0.4, 0.6, 1.0, 1.2, 1.9, 4.0, 4.5, 5.0];
    let r = ks_two_sample(&a, &b).unwrap();
    assert!((r.stat - 0.375).abs() < 1e-12);
    let ne = 7.0 * 8.0 / 15.0;
    assert_eq!(r.p, kolmogorov_survival(f64::sqrt(ne) * 0.375));
    assert!(ks_two_sample(&[], &b).is_err());
}

#[test]
fn ks_detects_shift_but_not_resampling() {
    let a = normals(2000, 1);
    let b = normals(2000, 2);
    assert!(ks_two_sample(&a, &b).unwrap().p > 0.01);
    let shifted: Vec<f64> = b.iter().map(|v| v + 0.3).collect();
    assert!(ks_two_sample(&a, &shifted).unwrap().p < 1e-6);
}

#[test]
fn acf_and_pacf_of_ar1() {
    let x = ar1(50_000, 0.6, 4);
    let r = acf(&x, 3).unwrap();
    assert_eq!(r[0], 1.0);
    for (k, rk) in r.iter().enumerate().skip(1) {
        assert!((rk - 0.6f64.powi(k as i32)).abs() < 0.03);
    }
    let p = pacf(&x, 3).unwrap();
    assert!((p[1] - 0.6).abs() < 0.03);
    assert!(p[2].abs() < 0.03 && p[3].abs() < 0.03);
}

#[test]
fn adf_lag_rule_and_p_values() {
    assert_eq!(auto_lag(100), 12);
    assert_eq!(auto_lag(10_000), 37);
    assert!(mackinnon_p(-10.0) < 1e-6);
    assert!(mackinnon_p(2.0) > 0.99);
    // 5% critical value for the constant-only case is about -2.86
    assert!((mackinnon_p(-2.862) - 0.05).abs() < 0.005);
    let r = adf_test(&normals(500, 3), LagOrder::Fixed(2)).unwrap();
    assert_eq!((r.lags, r.nobs), (2, 497));
    assert!(adf_test(&[1.0; 5], LagOrder::Auto).is_err());
}

#[test]
fn series_csv_and_report_json() {
    let s = EnergySeries::new("indicator", vec![1.5, -2.25, 3.0]).unwrap();
    assert_eq!(EnergySeries::from_csv(&s.to_csv()).unwrap(), s);
    assert_eq!(s.moving_average(2).unwrap().values, vec![-0.375, 0.375]);
    let report = StatReport {
        pearson: Some(0.5),
        ks_p: Some(0.2),
        calls: Some(10),
        ..StatReport::default()
    };
    let back = StatReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
    assert!(StatReport {
        ks_p: Some(1.5),
        ..StatReport::default()
    }
    .validate()
    .is_err());
}

proptest! {
    #[test]
    fn pearson_matches_direct_formula(seed in 0u64..1000, n in 3usize..200) {
        let x = normals(n, seed);
        let y = normals(n, seed + 5000);
        prop_assert!((idlepi::timeseries::pearson(&x, &y).unwrap() - common::pearson(&x, &y)).abs() < 1e-10);
    }

    #[test]
    fn moving_average_matches_direct_mean(seed in 0u64..1000, n in 1usize..300, w in 1usize..60) {
        let x = normals(n, seed);
        let w = w.min(n);
        let ma = moving_average(&x, w).unwrap();
        prop_assert_eq!(ma.len(), n - w + 1);
        for (i, v) in ma.iter().enumerate() {
            prop_assert!((v - mean(&x[i..i + w])).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_values_in_unit_interval(seed in 0u64..1000, n in 1usize..100) {
        let x = normals(n, seed);
        prop_assert!(minmax_normalize(&x).iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn rmsd_is_symmetric_and_zero_on_self(seed in 0u64..1000, n in 1usize..100) {
        let x = normals(n, seed);
        let y = normals(n, seed + 1);
        prop_assert_eq!(rmsd(&x, &y).unwrap(), rmsd(&y, &x).unwrap());
        prop_assert_eq!(rmsd(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn ks_p_in_unit_interval(seed in 0u64..1000, na in 1usize..80, nb in 1usize..80) {
        let r = ks_two_sample(&normals(na, seed), &normals(nb, seed + 1)).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.stat) && (0.0..=1.0).contains(&r.p));
    }
}
