use std::f64::consts::{FRAC_PI_2, PI};

use super::*;
use crate::solar_model::reference::reference_background;
use crate::solar_model::{potential_from_model, Atmosphere, SolarModel};
use crate::specfun::coulomb_fg;

fn true_phi(sol: &RadialSolution, x: f64) -> C {
    let (p, _, ls) = sol.eval(x).unwrap();
    p * ls.exp()
}

fn with_nodes(nodes: &[f64]) -> RadialOptions {
    RadialOptions { nodes: nodes.to_vec(), ..RadialOptions::default() }
}

#[test]
fn free_s_wave_is_sine() {
    let pot = PotentialProfile::free(1.0, 2.0);
    let sol = integrate_regular_with(&pot, 0, 2.0, &with_nodes(&[FRAC_PI_2])).unwrap();
    let i = sol.node_index(FRAC_PI_2).unwrap();
    let v = sol.phi[i] * sol.log_scale[i].exp();
    assert!((v - 1.0).norm() < 1e-9, "{v}");
    // first node follows the series start
    let x0 = sol.x_start();
    let r = sol.phi[0] * (sol.log_scale[0] - x0.ln()).exp();
    assert!((r - 1.0).norm() < 1e-6);
}

#[test]
fn free_p_wave_is_riccati_bessel() {
    let pot = PotentialProfile::free(1.0, 4.0);
    let sol = integrate_regular_with(&pot, 1, 4.0, &with_nodes(&[PI])).unwrap();
    for &x in &[0.3, 1.0, 2.5, PI, 3.9] {
        let exact = 3.0 * (x.sin() / x - x.cos());
        let v = true_phi(&sol, x);
        assert!((v / exact - 1.0).norm() < 1e-9, "x = {x}: {v} vs {exact}");
    }
}

#[test]
fn high_ell_free_wave_matches_bessel_ratio() {
    // deep in the forbidden region the solution must still be exact up to
    // scale: compare φ(x)/φ(y) with F_ℓ(0, x)/F_ℓ(0, y)
    let pot = PotentialProfile::free(1.0, 50.0);
    let sol = integrate_regular(&pot, 300, 50.0).unwrap();
    let (xa, xb) = (20.0, 50.0);
    let (pa, _, la) = sol.eval(xa).unwrap();
    let (pb, _, lb) = sol.eval(xb).unwrap();
    let got = (pa / pb).ln() + (la - lb);
    let fa = crate::specfun::coulomb_h(300, 0.0, xa).unwrap();
    let fb = crate::specfun::coulomb_h(300, 0.0, xb).unwrap();
    let want = (fa.h_plus.im.ln() - fa.scale) - (fb.h_plus.im.ln() - fb.scale);
    assert!((got.re - want).abs() < 1e-8, "{got} vs {want}");
}

#[test]
fn coulomb_interior_gives_regular_coulomb_function() {
    let (alpha, rc) = (2.0, 1e-4);
    let pot = PotentialProfile::from_fn(1.0, 1.0, alpha, 10.0, 1.0, vec![rc], move |x| {
        C::new(alpha / x.max(rc), 0.0)
    });
    let ell = 2;
    let sol = integrate_regular(&pot, ell, 10.0).unwrap();
    let ratio = |x: f64| {
        let (f, _, _, _) = coulomb_fg(ell, 1.0, x).unwrap();
        true_phi(&sol, x) / f
    };
    let r0 = ratio(1.0);
    for &x in &[2.0, 4.5, 7.0, 9.9] {
        assert!((ratio(x) / r0 - 1.0).norm() < 1e-8, "x = {x}");
    }
    let m = match_scattering(&sol, &pot).unwrap();
    assert!((m.s - 1.0).norm() < 1e-8, "{}", m.s);
}

#[test]
fn free_field_has_unit_s() {
    let pot = PotentialProfile::free(1.0, 30.0);
    for ell in [0, 1, 7, 40] {
        let sol = integrate_regular(&pot, ell, 30.0).unwrap();
        let m = match_scattering(&sol, &pot).unwrap();
        assert!((m.s - 1.0).norm() < 1e-9, "ell {ell}: {}", m.s);
        assert!(!m.cond_flag);
    }
}

#[test]
fn free_greens_closed_form() {
    let pot = PotentialProfile::free(1.0, 2.0);
    let g = radial_greens(&pot, 0).unwrap();
    let v = g.eval(FRAC_PI_2, FRAC_PI_2).unwrap();
    assert!((v - C::new(0.0, 1.0)).norm() < 1e-9, "{v}");
    for &(a, b) in &[(0.3f64, 1.1f64), (1.7, 0.2), (2.5, 0.9), (3.0, 5.0)] {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let want = C::from_polar(lo.sin(), hi);
        let got = g.eval(a, b).unwrap();
        assert!((got - want).norm() < 1e-9 * want.norm(), "({a}, {b}): {got} vs {want}");
    }
    let res = power_balance_residual(&g, &pot, 2.5, 7.0).unwrap();
    assert!(res < 1e-10, "{res}");
}

fn reference_potential(gamma: bool) -> PotentialProfile {
    let atm = Atmosphere::default();
    let mut m = reference_background(atm).unwrap();
    if !gamma {
        m = m.map_rows(|_, c, rho, _| (c, rho, 0.0)).unwrap();
    }
    potential_from_model(&m, 2.0 * PI * 5.3e-3).unwrap()
}

fn model_with_gamma(scale: f64) -> SolarModel {
    let m = reference_background(Atmosphere::default()).unwrap();
    m.map_rows(|_, c, rho, g| (c, rho, g * scale)).unwrap()
}

#[test]
fn real_potential_is_unitary_and_attenuation_absorbs() {
    let real = reference_potential(false);
    let lossy = reference_potential(true);
    for ell in [0, 60, 250] {
        let s = match_scattering(&integrate_regular(&real, ell, real.r_a).unwrap(), &real).unwrap().s;
        assert!((s.norm() - 1.0).abs() < 1e-8, "ell {ell}: |s| = {}", s.norm());
        let s = match_scattering(&integrate_regular(&lossy, ell, lossy.r_a).unwrap(), &lossy).unwrap().s;
        assert!(s.norm() < 1.0, "ell {ell}: |s| = {}", s.norm());
    }
}

#[test]
fn greens_reciprocity_and_tail() {
    let pot = reference_potential(true);
    let ra = pot.r_a;
    let rs = Atmosphere::default().solar_radius;
    let opts = GreensOptions { r_end: Some(ra + 3e6), r_inner: Some(0.8 * rs), ..GreensOptions::default() };
    let g = radial_greens_with(&pot, 40, &opts).unwrap();
    let pairs = [(0.85, 0.99), (0.999, 0.93), (1.0001, 1.00015), (1.002, 0.9)];
    for &(a, b) in &pairs {
        let (r1, r2) = (a * rs, b * rs);
        let x = g.eval(r1, r2).unwrap();
        let y = g.eval(r2, r1).unwrap();
        assert!((x - y).norm() <= 1e-9 * x.norm());
    }
    // closed form above R_a
    let m = *g.matching();
    let k = pot.k;
    for &(r1, r2) in &[(ra, ra), (ra + 1e6, ra + 2.5e6), (ra + 2e6, ra + 1e5)] {
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        let a = coulomb_h(40, pot.eta(), k * lo).unwrap();
        let b = coulomb_h(40, pot.eta(), k * hi).unwrap();
        let want = C::new(0.0, 0.5 / k) * (a.h_minus - m.s * a.h_plus) * b.h_plus;
        let got = g.eval(r1, r2).unwrap();
        assert!((got - want).norm() <= 1e-9 * want.norm(), "{got} vs {want}");
    }
}

#[test]
fn ode_residual_on_fine_grid() {
    let pot = reference_potential(true);
    let sol = integrate_regular(&pot, 30, pot.r_a).unwrap();
    let coef = Coefficient::new(&pot, 30);
    // stencils stay inside one knot interval, where v̂ is smooth
    let knots = pot.knots();
    let cells: Vec<(f64, f64)> =
        knots.windows(2).filter(|w| w[0] >= 0.9).map(|w| (0.5 * (w[0] + w[1]), 0.24 * (w[1] - w[0]))).collect();
    let xs: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let lref = sol.eval(pot.r_a_hat()).unwrap().2;
    let val = |x: f64| {
        let (p, _, ls) = sol.eval(x).unwrap();
        p * (ls - lref).exp()
    };
    let d2 = |x: f64, h: f64| (val(x + h) - val(x) * 2.0 + val(x - h)) / (h * h);
    let max = xs.iter().map(|&x| (coef.q(x) * val(x)).norm()).fold(0.0, f64::max);
    for &(x, h) in &cells {
        // two three-point stencils combined to cancel the h² term
        let dd = (d2(x, h) * 4.0 - d2(x, 2.0 * h)) / 3.0;
        let res = (dd - coef.q(x) * val(x)).norm();
        assert!(res <= 1e-6 * max, "x = {x}: {res} vs {max}");
    }
}

#[test]
fn refinement_changes_s_little() {
    let m = model_with_gamma(1.0);
    let omega = 2.0 * PI * 5.3e-3;
    let a = potential_from_model(&m, omega).unwrap();
    let b = potential_from_model(&m.refined().unwrap(), omega).unwrap();
    for ell in [0, 100, 250] {
        let sa = match_scattering(&integrate_regular(&a, ell, a.r_a).unwrap(), &a).unwrap().s;
        let sb = match_scattering(&integrate_regular(&b, ell, b.r_a).unwrap(), &b).unwrap().s;
        assert!((sa - sb).norm() <= 1e-8 * sa.norm(), "ell {ell}: {sa} vs {sb}");
    }
}

#[test]
fn tolerance_halving_is_stable_for_diagonal() {
    let pot = reference_potential(true);
    let r = Atmosphere::default().solar_radius + 1.05e5;
    let opts = |rtol: f64| GreensOptions {
        radial: RadialOptions { rtol, nodes: vec![r], ..RadialOptions::default() },
        r_inner: Some(r),
        ..GreensOptions::default()
    };
    let a = radial_greens_with(&pot, 100, &opts(1e-10)).unwrap().diagonal(r).unwrap();
    let b = radial_greens_with(&pot, 100, &opts(5e-11)).unwrap().diagonal(r).unwrap();
    assert!(a.im > 0.0);
    assert!((a - b).norm() <= 1e-7 * a.norm(), "{a} vs {b}");
}

#[test]
fn matching_ratio_is_healthy_for_free_waves() {
    let pot = PotentialProfile::free(1.0, 5.0);
    let m = match_scattering(&integrate_regular(&pot, 3, 5.0).unwrap(), &pot).unwrap();
    assert!(m.ratio > 1e-3 && !m.cond_flag);
}

#[test]
fn absorption_term_scales_with_gamma() {
    let omega = 2.0 * PI * 5.3e-3;
    let rs = Atmosphere::default().solar_radius;
    let r = rs + 1.05e5;
    let opts = GreensOptions {
        radial: RadialOptions { nodes: vec![r], ..RadialOptions::default() },
        r_inner: Some(r),
        ..GreensOptions::default()
    };
    // weak attenuation so that G itself barely changes
    let mut vols = Vec::new();
    for scale in [1e-6, 2e-6] {
        let pot = potential_from_model(&model_with_gamma(scale), omega).unwrap();
        let g = radial_greens_with(&pot, 20, &opts).unwrap();
        vols.push(g.absorption_hat(&pot, r / pot.length_unit).unwrap());
    }
    let ratio = vols[1] / vols[0];
    assert!((ratio - 2.0).abs() < 1e-4, "{ratio}");
}

#[test]
fn power_balance_decays_like_inverse_radius() {
    let factor = 10.0;
    let m = model_with_gamma(1.0).compressed(factor).unwrap();
    let pot = potential_from_model(&m, 2.0 * PI * 5.3e-3 * factor).unwrap();
    let r = m.solar_radius() + 1.05e5 / factor;
    let opts = GreensOptions {
        radial: RadialOptions { nodes: vec![r], ..RadialOptions::default() },
        r_inner: Some(r),
        ..GreensOptions::default()
    };
    // at high ℓ the centrifugal O(1/R²) term still dominates at these radii
    for ell in [0, 20, 50] {
        let g = radial_greens_with(&pot, ell, &opts).unwrap();
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0]
            .iter()
            .map(|&f| {
                let res = power_balance_residual(&g, &pot, r, f * pot.r_a).unwrap();
                ((f * pot.r_a).ln(), res.ln())
            })
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((-1.3..=-0.7).contains(&slope), "ell {ell}: slope {slope}, {pts:?}");
        let im = g.diagonal(r).unwrap().im;
        let res = power_balance_residual(&g, &pot, r, 8.0 * pot.r_a).unwrap();
        assert!(res < 1e-2 * im, "ell {ell}: {res} vs Im G {im}");
    }
}
