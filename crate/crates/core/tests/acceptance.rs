//! Acceptance run: one PASS/FAIL line per criterion, with its runtime.
//!
//! `cargo test --release --test acceptance -- 5 6` runs a subset.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use heliosolve::invert::{background_singular_values, irgnm, noise_level, ForwardConfig, ForwardModel, IrgnmConfig, Param};
use heliosolve::multipole::{assemble_circle_with, PartialWaveDiagonal, THETA_MIN};
use heliosolve::observe::{add_noise, cell_rng, chi2_ratio, exact_diagonals, ObservationSetup};
use heliosolve::radial::{
    integrate_regular, match_scattering, power_balance_residual, radial_greens_with, GreensOptions, RadialOptions,
};
use heliosolve::recover::extract_scattering;
use heliosolve::solar_model::reference::{reference_background, BumpPerturbation};
use heliosolve::solar_model::{potential_from_model, Atmosphere, SolarModel};
use heliosolve::specfun::{coulomb_h, coulomb_h_range};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mhz(f: f64) -> f64 {
    2.0 * PI * f * 1e-3
}

fn background() -> SolarModel {
    reference_background(Atmosphere::default()).unwrap()
}

/// Least-squares slope of ln y against x.
fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (x.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Relative residual of the Powell recurrence linking ℓ and ℓ+1.
fn powell_residual(l: usize, eta: f64, rho: f64) -> f64 {
    let v = coulomb_h_range(l + 1, eta, rho).unwrap();
    let (p, q) = (v[l], v[l + 1]);
    let lf = l as f64 + 1.0;
    let t = lf / rho + eta / lf;
    let r = (1.0 + (eta / lf).powi(2)).sqrt();
    let ds = (q.scale - p.scale).exp();
    let re = p.dh_plus.re - t * p.h_plus.re + r * q.h_plus.re * ds;
    let im = p.dh_plus.im - t * p.h_plus.im + r * q.h_plus.im / ds;
    let nre = p.dh_plus.re.abs().max(p.h_plus.re.abs() * t.abs());
    let nim = p.dh_plus.im.abs().max(p.h_plus.im.abs() * t.abs());
    (re.abs() / nre).max(im.abs() / nim)
}

fn special_functions() -> Outcome {
    let (mut wr, mut pw) = (0.0f64, 0.0f64);
    let mut n = 0;
    for &l in &[0usize, 50, 150, 250] {
        for i in 0..50 {
            let eta = 10.0 * i as f64 / 49.0;
            for j in 0..50 {
                let rho = 10f64.powf(4.0 * j as f64 / 49.0);
                let p = coulomb_h(l, eta, rho).unwrap();
                wr = wr.max((p.wronskian() - C::new(0.0, 2.0)).norm());
                pw = pw.max(powell_residual(l, eta, rho));
                n += 1;
            }
        }
    }
    outcome(wr <= 2e-10 && pw <= 1e-9, format!("{n} points: max |W - 2i| = {wr:.2e} (<= 2e-10), max Powell residual = {pw:.2e} (<= 1e-9)"))
}

fn free_field() -> Outcome {
    let (k, rho, l_max) = (1.0, 50.0, 400);
    let pairs = coulomb_h_range(l_max, 0.0, rho).unwrap();
    let values = pairs
        .iter()
        .map(|p| {
            let f = p.h_plus.im * (-p.scale).exp();
            C::new(p.h_plus.im * p.h_plus.re, f * f) / k
        })
        .collect();
    let diag = PartialWaveDiagonal { r: rho / k, values };
    let thetas: Vec<f64> = (0..=1000).map(|i| 0.1 + (PI - 0.2) * i as f64 / 1000.0).collect();
    let (s, _) = assemble_circle_with(&diag, &thetas, THETA_MIN).unwrap();
    let mut worst = 0.0f64;
    for (&t, v) in s.thetas.iter().zip(&s.values) {
        let d = 2.0 * diag.r * (0.5 * t).sin();
        let exact = C::from_polar(1.0, k * d) / (4.0 * PI * d);
        worst = worst.max((v - exact).norm() / exact.norm());
    }
    outcome(worst <= 1e-6, format!("kR = 50, l <= 400, 1001 angles: max relative error {worst:.2e} (<= 1e-6)"))
}

fn reciprocity_and_tail() -> Outcome {
    let bg = background();
    let pot = potential_from_model(&bg, mhz(5.3)).unwrap();
    let rs = bg.solar_radius();
    let (ra, top) = (pot.r_a, pot.r_a + 3e6);
    let opts = GreensOptions { r_end: Some(top), r_inner: Some(0.8 * rs), ..GreensOptions::default() };
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let (mut rec, mut tail) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let ell = rng.random_range(0..=250usize);
        let g = radial_greens_with(&pot, ell, &opts).unwrap();
        let (r1, r2) = (rng.random_range(0.8 * rs..top), rng.random_range(0.8 * rs..top));
        let x = g.eval(r1, r2).unwrap();
        rec = rec.max((x - g.eval(r2, r1).unwrap()).norm() / x.norm());
        let (t1, t2) = (rng.random_range(ra..top), rng.random_range(ra..top));
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let a = coulomb_h(ell, pot.eta(), pot.k * lo).unwrap();
        let b = coulomb_h(ell, pot.eta(), pot.k * hi).unwrap();
        let s = g.matching().s;
        let want = C::new(0.0, 0.5 / pot.k) * (a.h_minus - s * a.h_plus) * b.h_plus;
        let got = g.eval(t1, t2).unwrap();
        tail = tail.max((got - want).norm() / want.norm());
    }
    outcome(
        rec <= 1e-9 && tail <= 1e-9,
        format!("100 cases at 5.3 mHz: reciprocity {rec:.2e}, closed-form tail {tail:.2e} (both <= 1e-9)"),
    )
}

fn power_balance() -> Outcome {
    let factor = 10.0;
    let m = background().compressed(factor).unwrap();
    let pot = potential_from_model(&m, mhz(5.3) * factor).unwrap();
    let r = m.solar_radius() + 1.05e5 / factor;
    let opts = GreensOptions {
        radial: RadialOptions { nodes: vec![r], ..RadialOptions::default() },
        r_inner: Some(r),
        ..GreensOptions::default()
    };
    let big_r = 4.0 * pot.r_a;
    let mut slopes = Vec::new();
    for ell in [0, 20, 50] {
        let g = radial_greens_with(&pot, ell, &opts).unwrap();
        let a = power_balance_residual(&g, &pot, r, big_r).unwrap();
        let b = power_balance_residual(&g, &pot, r, 2.0 * big_r).unwrap();
        slopes.push((ell, (b / a).ln() / 2f64.ln()));
    }
    let pass = slopes.iter().all(|(_, s)| (-1.3..=-0.7).contains(s));
    let text: Vec<String> = slopes.iter().map(|(l, s)| format!("l={l}: {s:.3}")).collect();
    outcome(pass, format!("radii ÷ {factor}, R = 4 R_a: slopes {} (in [-1.3, -0.7])", text.join(", ")))
}

fn scattering_round_trip() -> Outcome {
    let bg = background();
    let omegas = vec![mhz(5.3), mhz(5.4)];
    let setup = ObservationSetup::new(vec![105e3, 144e3], omegas.clone(), 250);
    let table = extract_scattering(&exact_diagonals(&bg, &setup).unwrap(), &bg).unwrap();
    let (mut worst, mut used, mut skipped) = (0.0f64, 0, 0);
    for (w, &omega) in omegas.iter().enumerate() {
        let pot = potential_from_model(&bg, omega).unwrap();
        for ell in 0..=250 {
            let i = table.index(ell, w);
            if !(table.valid[i] && table.condition[i] < 1e4) {
                skipped += 1;
                continue;
            }
            let s = match_scattering(&integrate_regular(&pot, ell, pot.r_a).unwrap(), &pot).unwrap().s;
            worst = worst.max((table.s[i] - s).norm() / s.norm());
            used += 1;
        }
    }
    outcome(
        worst <= 1e-8 && used > 0,
        format!("{used} cells with condition < 1e4 ({skipped} excluded): max relative error {worst:.2e} (<= 1e-8)"),
    )
}

fn inversion_model(bg: &SolarModel, omegas: &[f64]) -> ForwardModel {
    let rs = bg.solar_radius();
    ForwardModel::new(ForwardConfig::new(bg.clone(), (0.9 * rs, 0.95 * rs), 51, 250, omegas.to_vec())).unwrap()
}

fn exact_inversion() -> Outcome {
    let atm = Atmosphere::default();
    let bg = background();
    let omegas = vec![mhz(5.3), mhz(5.4)];
    let truth = BumpPerturbation::standard(&atm, 0.01, 0.05, 2.0 * PI * 20e-6).apply(&bg).unwrap();
    let setup = ObservationSetup::new(vec![105e3, 144e3], omegas.clone(), 250);
    let data = extract_scattering(&exact_diagonals(&truth, &setup).unwrap(), &bg).unwrap();
    let fwd = inversion_model(&bg, &omegas);
    let res = irgnm(&data, &fwd, &IrgnmConfig::default(), None).unwrap().with_truth(&truth, &bg);
    let e = res.errors.unwrap().map(|v| v.unwrap());
    outcome(
        e.iter().all(|v| *v <= 0.2),
        format!(
            "dc 1%, drho 5%, dgamma 20 uHz: e(c) = {:.2}%, e(rho) = {:.2}%, e(gamma) = {:.2}% (each <= 20%), {} steps",
            100.0 * e[0],
            100.0 * e[1],
            100.0 * e[2],
            res.history.len()
        ),
    )
}

fn noisy_inversion() -> Outcome {
    let atm = Atmosphere::default();
    let bg = background();
    let omegas: Vec<f64> = [5.27, 5.29, 5.31, 5.34, 5.36, 5.38].iter().map(|&f| mhz(f)).collect();
    let fwd = inversion_model(&bg, &omegas);
    let cases = [
        (Param::C, (0.01, 0.0, 0.0), 11.7, 9.0),
        (Param::Rho, (0.0, 0.05, 0.0), 16.8, 37.8),
        (Param::Gamma, (0.0, 0.0, 2.0 * PI * 20e-6), 11.36, 9.3),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, (dc, drho, dg), centre, band) in cases {
        let truth = BumpPerturbation::standard(&atm, dc, drho, dg).apply(&bg).unwrap();
        let mut setup = ObservationSetup::new(vec![105e3, 144e3], omegas.clone(), 250);
        setup.n_segments = 974;
        let exact = exact_diagonals(&truth, &setup).unwrap();
        let icfg = IrgnmConfig { free: vec![p], ..IrgnmConfig::default() };
        let mut errs = Vec::new();
        for seed in 0..20 {
            setup.seed = seed;
            let noisy = add_noise(&exact, &setup).unwrap();
            let data = extract_scattering(&noisy, &bg).unwrap();
            let delta = noise_level(&noisy, &bg, &data, &fwd, icfg.weight_mode).unwrap();
            let res = irgnm(&data, &fwd, &icfg, Some(delta)).unwrap().with_truth(&truth, &bg);
            errs.push(100.0 * res.errors.unwrap()[p as usize].unwrap());
        }
        let (m, s) = mean_std(&errs);
        let ok = (m - centre).abs() <= band;
        pass &= ok;
        parts.push(format!("{}: {m:.1}% ± {s:.1}% (want {centre}% ± {band}%)", p.name()));
    }
    outcome(pass, format!("N = 974, six frequencies, 20 seeds: {}", parts.join("; ")))
}

fn ill_posedness() -> Outcome {
    let bg = background();
    let fwd = inversion_model(&bg, &[mhz(5.3), mhz(5.4)]);
    let idx: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let slope_of = |free: &[Param]| {
        let sv = background_singular_values(&fwd, free, None).unwrap();
        (log_slope(&idx, &sv[..20]), sv[19] / sv[0])
    };
    let (full, ratio) = slope_of(&Param::ALL);
    let singles: Vec<String> =
        Param::ALL.iter().map(|&p| format!("{} alone {:.3}", p.name(), slope_of(&[p]).0)).collect();
    outcome(
        full < -0.5,
        format!(
            "c, rho, gamma jointly: slope {full:.3} per index (< -0.5), s20/s1 = {ratio:.2e}; diagnostics: {}",
            singles.join(", ")
        ),
    )
}

fn chi_square() -> Outcome {
    let cells = 100_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [1usize, 974] {
        let x: Vec<f64> = (0..cells).map(|c| chi2_ratio(n, &mut cell_rng(77 + n as u64, c))).collect();
        let m = x.iter().sum::<f64>() / cells as f64;
        let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (cells - 1) as f64;
        let ok = (m - 1.0).abs() <= 0.01 && (v * n as f64 - 1.0).abs() <= 0.1;
        pass &= ok;
        parts.push(format!("N={n}: mean {m:.4}, N·var {:.4}", v * n as f64));
    }
    outcome(pass, format!("1e5 cells, {} (mean within 1%, variance within 10%)", parts.join("; ")))
}

type Criterion = (u32, &'static str, f64, fn() -> Outcome);

const CRITERIA: [Criterion; 9] = [
    (1, "special functions", 30.0, special_functions),
    (2, "free-field assembly", 10.0, free_field),
    (3, "reciprocity and tail", 60.0, reciprocity_and_tail),
    (4, "power balance", 60.0, power_balance),
    (5, "scattering round trip", 300.0, scattering_round_trip),
    (6, "exact-data inversion", 1800.0, exact_inversion),
    (7, "noisy single-parameter inversion", f64::INFINITY, noisy_inversion),
    (8, "ill-posedness witness", 600.0, ill_posedness),
    (9, "chi-square statistics", 30.0, chi_square),
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, limit, run) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let in_time = secs <= limit;
        let pass = o.pass && in_time;
        let budget = if limit.is_finite() { format!("{secs:.1} s of {limit:.0} s") } else { format!("{secs:.1} s") };
        println!("[{}] {id}. {name}: {} [{budget}]", if pass { "PASS" } else { "FAIL" }, o.detail);
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
