use insnav_demo::{compare_variants, earth_curves, window_fit};

#[test]
fn window_fit_recovers_a_parabola() {
    let times = [2.0, 3.0, 4.0, 5.0];
    let positions: Vec<f64> = times
        .iter()
        .map(|t| 1.0 + 2.0 * (t - 2.0) + 0.5 * 0.3 * (t - 2.0) * (t - 2.0))
        .collect();
    let out = window_fit(&times, &positions, 1.5).unwrap();
    assert_eq!(out.len(), 4 + 2 * times.len());
    assert!((out[0] - 0.3).abs() < 1e-12);
    assert!((out[1] - 2.0).abs() < 1e-12);
    assert!((out[2] - 1.0).abs() < 1e-12);
    let weights = &out[4..8];
    assert!(weights.iter().sum::<f64>().abs() < 1e-12);
    let sigma_a = 1.5 * weights.iter().map(|b| b * b).sum::<f64>().sqrt();
    assert!((out[3] - sigma_a).abs() < 1e-12);
    assert!(out[8..].iter().all(|r| r.abs() < 1e-12));
}

#[test]
fn window_fit_rejects_short_windows() {
    assert!(window_fit(&[0.0, 1.0], &[0.0, 1.0], 1.0).is_err());
    assert!(window_fit(&[0.0, 1.0, 2.0], &[0.0, 1.0], 1.0).is_err());
}

#[test]
fn comparison_reports_both_variants() {
    let out = compare_variants("racetrack", 30.0, 3, 0.02, 1.5).unwrap();
    let n = out[5] as usize;
    assert_eq!(out.len(), 6 + 3 * n);
    assert!(n >= 29);
    assert!(out[0] > 0.0 && out[1] > 0.0);
    assert!((out[2] - 100.0 * (1.0 - out[1] / out[0])).abs() < 1e-9);
    assert!(compare_variants("spiral", 30.0, 3, 0.02, 1.5).is_err());
}

#[test]
fn earth_curves_grow_toward_the_pole() {
    let out = earth_curves(0.0, 80.0, 9, 0.0).unwrap();
    assert_eq!(out.len(), 54);
    let g: Vec<f64> = out.chunks(6).map(|r| r[1]).collect();
    assert!(g.windows(2).all(|w| w[1] > w[0]));
    assert!((g[0] - 9.7803).abs() < 1e-3);
    let rm: Vec<f64> = out.chunks(6).map(|r| r[2]).collect();
    assert!(rm.windows(2).all(|w| w[1] > w[0]));
    assert!(earth_curves(0.0, 1.0, 1, 0.0).is_err());
}
