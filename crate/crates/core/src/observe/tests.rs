use std::f64::consts::PI;

use super::*;
use crate::solar_model::reference::reference_background;
use crate::solar_model::Atmosphere;

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn draws(n_seg: usize, cells: usize, seed: u64) -> Vec<f64> {
    (0..cells).map(|c| chi2_ratio(n_seg, &mut cell_rng(seed, c))).collect()
}

#[test]
fn free_field_s_wave_diagonal() {
    let k = 1.3;
    let setup = ObservationSetup::new(vec![0.5, 1.7], vec![k], 0);
    let d = diagonals_from_potentials(|_| Ok(PotentialProfile::free(k, 3.0)), 1.0, &setup, &RadialOptions::default())
        .unwrap();
    for (h, &height) in setup.heights.iter().enumerate() {
        let r = 1.0 + height;
        let want = (k * r).sin().powi(2) / k;
        assert!((d.get(h, 0, 0) - want).abs() < 1e-9, "{} vs {want}", d.get(h, 0, 0));
    }
}

#[test]
fn reference_background_two_heights() {
    let model = reference_background(Atmosphere::default()).unwrap();
    let setup = ObservationSetup::new(vec![105e3, 144e3], vec![2.0 * PI * 5.3e-3], 250);
    let d = exact_diagonals(&model, &setup).unwrap();
    assert_eq!(d.values.len(), 2 * 251);
    assert!(d.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    let mut worst: f64 = 0.0;
    for ell in 0..=250 {
        let (a, b) = (d.get(0, ell, 0), d.get(1, ell, 0));
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
    }
    assert!(worst > 1e-3, "{worst}");
}

#[test]
fn below_cutoff_is_rejected() {
    let model = reference_background(Atmosphere::default()).unwrap();
    let setup = ObservationSetup::new(vec![105e3, 144e3], vec![2.0 * PI * 3e-3], 2);
    assert!(matches!(exact_diagonals(&model, &setup), Err(Error::BelowCutoff { .. })));
}

#[test]
fn setup_validation() {
    let mut s = ObservationSetup::new(vec![1.0], vec![1.0], 2);
    assert!(s.validate().is_err());
    s.heights = vec![2.0, 1.0];
    assert!(s.validate().is_err());
    s.heights = vec![1.0, 2.0];
    assert!(s.validate().is_ok());
    s.n_segments = 0;
    assert!(s.validate().is_err());
    s.n_segments = 3;
    s.pi = vec![1.0, 2.0];
    assert!(s.validate().is_err());
}

#[test]
fn single_segment_is_exponential() {
    let x = draws(1, 100_000, 11);
    let (m, v) = mean_var(&x);
    assert!((0.99..=1.01).contains(&m), "{m}");
    assert!((v - 1.0).abs() < 0.03, "{v}");
}

#[test]
fn long_campaign_variance() {
    let x = draws(974, 10_000, 5);
    let (m, v) = mean_var(&x);
    assert!((m - 1.0).abs() < 3.0 * (1.0f64 / 974.0 / 1e4).sqrt() + 1e-4, "{m}");
    assert!((v * 974.0 - 1.0).abs() < 0.1, "{}", v * 974.0);
}

#[test]
fn gamma_branch_matches_moments() {
    let x = draws(5000, 20_000, 3);
    let (m, v) = mean_var(&x);
    assert!((m - 1.0).abs() < 1e-3, "{m}");
    assert!((v * 5000.0 - 1.0).abs() < 0.1);
    let big = chi2_ratio(1_000_000, &mut cell_rng(9, 0));
    assert!((big - 1.0).abs() < 5e-3);
}

fn toy_exact(cells: usize) -> (GreensDiagonal, ObservationSetup) {
    let setup = ObservationSetup::new(vec![0.0, 10.0], vec![1.0], cells - 1);
    let values = (0..2 * cells).map(|i| 1.0 + (i as f64).sin().abs()).collect();
    let d = GreensDiagonal {
        heights: setup.heights.clone(),
        ell_max: cells - 1,
        omegas: vec![1.0],
        values,
        is_noisy: false,
        n_segments: None,
        seed: None,
    };
    (d, setup)
}

#[test]
fn noise_is_reproducible_and_shrinks_like_root_n() {
    let (exact, mut setup) = toy_exact(500);
    setup.seed = 42;
    setup.n_segments = 10;
    let a = add_noise(&exact, &setup).unwrap();
    let b = add_noise(&exact, &setup).unwrap();
    assert_eq!(a, b);
    setup.seed = 43;
    assert_ne!(add_noise(&exact, &setup).unwrap().values, a.values);
    let rms = |d: &GreensDiagonal| {
        let s: f64 = d.values.iter().zip(&exact.values).map(|(x, e)| ((x - e) / e).powi(2)).sum();
        (s / d.values.len() as f64).sqrt()
    };
    let r10 = rms(&a);
    setup.n_segments = 1000;
    let r1000 = rms(&add_noise(&exact, &setup).unwrap());
    let ratio = r10 / r1000;
    assert!((8.5..=11.5).contains(&ratio), "{ratio}");
}

#[test]
fn negative_exact_values_are_reported() {
    let (mut exact, setup) = toy_exact(3);
    exact.values[4] = -1e-3;
    assert!(matches!(add_noise(&exact, &setup), Err(Error::Consistency(_))));
}

#[test]
fn segment_plans() {
    let day = 86400.0;
    let p = segment_plan(8.0 * 365.25 * day, 3.0 * day, 45.0).unwrap();
    assert_eq!(p.n_segments, 974);
    assert!((p.freq_resolution - 3.858e-6).abs() < 1e-9);
    assert!((p.max_freq - 11.11e-3).abs() < 1e-5);
    assert_eq!(segment_plan(1e5, 1e5, 30.0).unwrap().n_segments, 1);
    let p = segment_plan(6.0 * day, 3.0 * day, 60.0).unwrap();
    assert_eq!(p.n_segments, 2);
    assert!((p.max_freq - 8.333e-3).abs() < 1e-6);
    assert!(segment_plan(1.0, 2.0, 1.0).is_err());
    assert!(segment_plan(0.0, 2.0, 1.0).is_err());
}

#[test]
fn diagonal_csv_round_trip() {
    let (exact, mut setup) = toy_exact(4);
    setup.n_segments = 974;
    setup.seed = 7;
    for d in [exact.clone(), add_noise(&exact, &setup).unwrap()] {
        let text = write_diagonal(&d);
        let back = parse_diagonal(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(write_diagonal(&back), text);
    }
    let text = write_diagonal(&add_noise(&exact, &setup).unwrap());
    assert!(text.starts_with("# heliosolve-diag v1 rng=ChaCha20Rng seed=7\nheight_m,ell,omega_rad_s,im_G,is_noisy,N\n"));
    let lines: Vec<&str> = text.lines().collect();
    let short = lines[..lines.len() - 1].join("\n");
    assert!(matches!(parse_diagonal(&short), Err(Error::Parse { .. })));
}
