use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::radial::{radial_greens, RadialOptions};
use crate::solar_model::reference::reference_background;
use crate::solar_model::{potential_from_model, Atmosphere};

/// Free-field diagonals Im G_ℓ(r,r) = F_ℓ(kr)²/k at radii r_sun + h.
fn free_diagonal(k: f64, r_sun: f64, heights: [f64; 2], ell_max: usize) -> GreensDiagonal {
    let mut d = GreensDiagonal {
        heights: heights.to_vec(),
        ell_max,
        omegas: vec![k],
        values: vec![0.0; 2 * (ell_max + 1)],
        is_noisy: false,
        n_segments: None,
        seed: None,
    };
    for (h, height) in heights.iter().enumerate() {
        let pairs = coulomb_h_range(ell_max, 0.0, k * (r_sun + height)).unwrap();
        for (ell, p) in pairs.iter().enumerate() {
            let i = d.index(h, ell, 0);
            d.values[i] = p.f().powi(2) / k;
        }
    }
    d
}

const FREE: TailGeometry = TailGeometry { r_sun: 10.0, alpha: 0.0 };

#[test]
fn free_field_gives_unit_s() {
    let d = free_diagonal(1.0, FREE.r_sun, [0.3, 0.9], 12);
    let t = extract_scattering_with(&d, &[1.0], FREE, DET_MIN).unwrap();
    for ell in 0..=12 {
        assert!(t.valid[ell]);
        assert!((t.get(ell, 0) - 1.0).norm() < 1e-10, "{ell}: {}", t.get(ell, 0));
    }
}

#[test]
fn half_wavelength_apart_is_singular_for_s_waves() {
    // ϑ_0 = 2kr at α = 0, so Δr = π/(2k) gives ϑ₂ − ϑ₁ = π
    let k = 1.0;
    let d = free_diagonal(k, FREE.r_sun, [0.0, PI / (2.0 * k)], 0);
    let t = extract_scattering_with(&d, &[k], FREE, DET_MIN).unwrap();
    assert!(!t.valid[0] && t.s[0].re.is_nan());
    assert!(t.condition[0] > 1e10);
    let d = free_diagonal(k, FREE.r_sun, [0.0, PI / (2.0 * k) + 0.1], 0);
    assert!(extract_scattering_with(&d, &[k], FREE, DET_MIN).unwrap().valid[0]);
}

#[test]
fn strict_extraction_names_the_cell() {
    let model = reference_background(Atmosphere::default()).unwrap();
    let omega = 2.0 * PI * 5.3e-3;
    let k = wavenumber(&model, omega).unwrap();
    let mut d = free_diagonal(k, model.solar_radius(), [105e3, 105e3 + PI / (2.0 * k)], 0);
    d.omegas = vec![omega];
    let geom = TailGeometry { alpha: 0.0, ..TailGeometry::of(&model) };
    let t = extract_scattering_with(&d, &[k], geom, DET_MIN).unwrap();
    assert!(!t.valid[0]);
    let e = extract_scattering_strict(&d, &model);
    assert!(e.is_ok() || matches!(e, Err(Error::SingularSystem(_))));
}

#[test]
fn exact_round_trip_on_reference_background() {
    let model = reference_background(Atmosphere::default()).unwrap();
    let omega = 2.0 * PI * 5.4e-3;
    let setup = crate::observe::ObservationSetup::new(vec![105e3, 144e3], vec![omega], 40);
    let d = crate::observe::exact_diagonals(&model, &setup).unwrap();
    let t = extract_scattering(&d, &model).unwrap();
    let pot = potential_from_model(&model, omega).unwrap();
    for ell in 0..=40 {
        let s = radial_greens(&pot, ell).unwrap().matching().s;
        let i = t.index(ell, 0);
        assert!(t.valid[i] && t.condition[i] < 1e4);
        assert!((t.s[i] - s).norm() <= 1e-8 * s.norm(), "{ell}: {} vs {s}", t.s[i]);
    }
    let _ = RadialOptions::default();
}

#[test]
fn scan_finds_half_wavelength_points() {
    let (k, r_o) = (1.0, 1.0);
    let hits = scan_phases(k, 0.0, r_o, (r_o, r_o + 2.0 * PI), 0, &ScanOptions { n_points: 401, threshold: 1e-3 })
        .unwrap();
    assert_eq!(hits.len(), 4, "{hits:?}");
    for (n, h) in hits.iter().enumerate() {
        let want = r_o + (n + 1) as f64 * PI / (2.0 * k);
        assert!((h.r - want).abs() < 1e-12 && h.ell == 0 && h.abs_sin < 1e-12);
    }
    let empty = scan_phases(k, 0.0, r_o, (r_o + 1.0, r_o), 0, &ScanOptions::default()).unwrap();
    assert!(empty.is_empty());
}

#[test]
fn scan_near_the_surface() {
    let model = reference_background(Atmosphere::default()).unwrap();
    let omega = 2.0 * PI * 5.3e-3;
    let r_o = model.solar_radius() + 105e3;
    let range = (r_o, r_o + 50e3);
    let s0 = singular_set_scan(&model, omega, r_o, range, 0, &ScanOptions::default()).unwrap();
    assert!(s0.is_empty(), "{s0:?}");
    // a range starting off R_o has a one-sided minimum at its left end
    let off = (r_o + 200.0, r_o + 50e3);
    let wide = ScanOptions { n_points: 201, threshold: 0.2 };
    let a = singular_set_scan(&model, omega, r_o, off, 250, &wide).unwrap();
    let b = singular_set_scan(&model, omega, r_o, off, 250, &ScanOptions { threshold: 2e-3, ..wide }).unwrap();
    assert!(!a.is_empty());
    assert!(b.len() <= a.len() && b.iter().all(|p| a.iter().any(|q| q.r == p.r)));
}

#[test]
fn noise_amplification_envelope() {
    let (k, heights) = (1.0, [0.3, 0.9]);
    let d = free_diagonal(k, FREE.r_sun, heights, 8);
    let exact = extract_scattering_with(&d, &[k], FREE, DET_MIN).unwrap();
    let eps = 1e-4;
    let mut noisy = d.clone();
    for (i, v) in noisy.values.iter_mut().enumerate() {
        *v *= 1.0 + eps * if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    let t = extract_scattering_with(&noisy, &[k], FREE, DET_MIN).unwrap();
    for i in 0..t.len() {
        let err = (t.s[i] - exact.s[i]).norm();
        assert!(err <= 10.0 * t.condition[i] * eps, "{i}: {err} vs {}", t.condition[i]);
    }
}

#[test]
fn scattering_csv_round_trip() {
    let mut t = ScatteringTable::new(2, vec![0.033, 0.034]);
    for (i, s) in t.s.iter_mut().enumerate() {
        *s = C::new(0.1 * i as f64, -1.0 / (i as f64 + 3.0));
    }
    t.condition[3] = 2.5e7;
    t.valid[3] = false;
    let text = write_scattering(&t);
    assert!(text.starts_with("# heliosolve-smat v1\nell,omega_rad_s,re_s,im_s,condition,valid\n0,3.3e-2,"));
    let back = parse_scattering(&text).unwrap();
    assert_eq!(back, t);
    assert_eq!(write_scattering(&back), text);
    t.s[3] = C::new(f64::NAN, f64::NAN);
    let back = parse_scattering(&write_scattering(&t)).unwrap();
    assert!(back.s[3].re.is_nan() && !back.valid[3]);
}

proptest! {
    #[test]
    fn solved_cells_satisfy_both_equations(
        t1 in -10.0f64..10.0,
        gap in 1e-5f64..3.1,
        rhs in prop::array::uniform2(-5.0f64..5.0),
    ) {
        let sys = TwoHeightSystem {
            ell: 0,
            omega: 1.0,
            vartheta: [t1, t1 + gap],
            rhs,
            det: gap.sin(),
            sensitivity: [1.0, 1.0],
        };
        prop_assert!(sys.det.abs() <= 1.0);
        let (a, b) = sys.row(0);
        let (c, d) = sys.row(1);
        prop_assert!(((a * d - b * c) + sys.det).abs() < 1e-12);
        let s = sys.solve(DET_MIN).unwrap();
        prop_assert!(sys.residual(s) <= 1e-9);
    }
}
