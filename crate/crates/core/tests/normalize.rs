use proptest::prelude::*;
use thalparc_core::normalize::{percentile_sorted, ColumnScale};
use thalparc_core::{Matrix, RobustScaler};

/// Percentile from the piecewise-linear empirical quantile function whose
/// knots are the order statistics at plotting positions i/(n−1).
fn percentile_oracle(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 1 {
        return v[0];
    }
    for i in 0..n - 1 {
        let p0 = i as f64 / (n - 1) as f64;
        let p1 = (i + 1) as f64 / (n - 1) as f64;
        if q >= p0 && q <= p1 {
            let t = (q - p0) / (p1 - p0);
            return v[i] * (1.0 - t) + v[i + 1] * t;
        }
    }
    v[n - 1]
}

fn column(values: &[f64]) -> Matrix {
    Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
}

fn fit1(values: &[f64], directional: bool) -> ColumnScale {
    RobustScaler::fit(&column(values), &[directional]).unwrap().columns[0]
}

#[test]
fn uniform_column_breakpoints() {
    let v: Vec<f64> = (0..=1000).map(f64::from).collect();
    let s = fit1(&v, false);
    assert!((s.p_lo - percentile_oracle(&v, 0.025)).abs() < 1e-12);
    assert!((s.p_lo - 25.0).abs() < 1e-9);
    assert!((s.p_hi - 975.0).abs() < 1e-9);
    assert!((s.apply(500.0) - 0.5).abs() < 1e-3);
}

#[test]
fn two_point_and_constant_columns() {
    let s = fit1(&[1.0, 0.0], false);
    assert!((s.p_lo - 0.025).abs() < 1e-15);
    assert!((s.p_hi - 0.975).abs() < 1e-15);

    let s = fit1(&[4.0; 7], false);
    assert_eq!((s.min, s.p_lo, s.p_hi, s.max), (4.0, 4.0, 4.0, 4.0));
    assert_eq!(s.apply(4.0), 0.5);
    assert_eq!(s.apply(-100.0), 0.5);
    assert_eq!(fit1(&[4.0; 7], true).apply(9.0), 0.0);
}

#[test]
fn rejects_bad_training_data() {
    assert!(RobustScaler::fit(&column(&[1.0]), &[false]).is_err());
    assert!(RobustScaler::fit(&column(&[1.0, f64::NAN]), &[false]).is_err());
    let s = RobustScaler::fit(&column(&[1.0, 2.0]), &[false]).unwrap();
    assert!(s.transform(&Matrix::zeros(2, 2)).is_err());
}

#[test]
fn sidecar_roundtrip() {
    let m = Matrix::from_rows(&[[0.0, 5.0], [1.0, -2.0], [3.5, 8.25]]).unwrap();
    let s = RobustScaler::fit(&m, &[false, true]).unwrap();
    let mut buf = Vec::new();
    s.write_tsv(&mut buf).unwrap();
    assert_eq!(RobustScaler::read_tsv(buf.as_slice()).unwrap(), s);
}

#[test]
fn train_only_fitting() {
    let train: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
    let test: Vec<f64> = train.iter().map(|v| v * 3.0 + 2.0).collect();
    let s = RobustScaler::fit(&column(&train), &[false]).unwrap();
    let before = s.clone();
    let out = s.transform(&column(&test)).unwrap();
    assert_eq!(s, before);
    assert!(out.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    let both: Vec<f64> = train.iter().chain(&test).copied().collect();
    assert_ne!(RobustScaler::fit(&column(&both), &[false]).unwrap(), s);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn percentile_matches_oracle(v in prop::collection::vec(-1e3f64..1e3, 1..60), q in 0.0f64..=1.0) {
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let got = percentile_sorted(&sorted, q);
        let want = percentile_oracle(&v, q);
        prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()));
    }

    #[test]
    fn range_monotone_and_breakpoints(
        v in prop::collection::vec(-1e3f64..1e3, 2..80),
        probes in prop::collection::vec(-3e3f64..3e3, 2..20),
        directional in any::<bool>(),
    ) {
        let s = fit1(&v, directional);
        prop_assert!(s.min <= s.p_lo && s.p_lo <= s.p_hi && s.p_hi <= s.max);
        let (lo, hi) = if directional { (-1.0, 1.0) } else { (0.0, 1.0) };
        let mut probes = probes;
        probes.extend(&v);
        probes.sort_by(f64::total_cmp);
        let mapped: Vec<f64> = probes.iter().map(|&x| s.apply(x)).collect();
        for w in mapped.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for &y in &mapped {
            prop_assert!(y >= lo && y <= hi);
        }
        if !s.is_degenerate() {
            let unit = |y: f64| if directional { (y + 1.0) / 2.0 } else { y };
            prop_assert!((unit(s.apply(s.p_lo)) - 0.025).abs() < 1e-12);
            prop_assert!((unit(s.apply(s.p_hi)) - 0.975).abs() < 1e-12);
            if s.min < s.p_lo {
                prop_assert_eq!(unit(s.apply(s.min)), 0.0);
            }
            if s.max > s.p_hi {
                prop_assert_eq!(unit(s.apply(s.max)), 1.0);
            }
        }
    }
}
