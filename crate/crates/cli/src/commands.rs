use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use heliosolve::invert::{irgnm_observed, noise_level, ForwardConfig, ForwardModel, StopReason};
use heliosolve::observe::{
    add_noise, exact_diagonals_with, load_diagonal, save_diagonal, segment_plan, ObservationSetup, SegmentPlan,
};
use heliosolve::radial::RadialOptions;
use heliosolve::recover::{extract_scattering, save_scattering, singular_set_scan, ScanOptions};
use heliosolve::solar_model::reference::{reference_background, BumpPerturbation};
use heliosolve::solar_model::{load_background, save_background, SolarModel};
use heliosolve::specfun::coulomb_fg;
use heliosolve::table::{Field, TableWriter};
use heliosolve::{Error, Result};
use log::info;
use serde_json::json;

use crate::config::RunConfig;

pub const SCAN_HEADER: &str = "# heliosolve-scan v1";
pub const PLAN_HEADER: &str = "# heliosolve-plan v1";
pub const REPORT_FORMAT: &str = "heliosolve-report v1";

fn background(cfg: &RunConfig) -> Result<SolarModel> {
    match &cfg.model {
        Some(p) => load_background(p, cfg.atmosphere()),
        None => reference_background(cfg.atmosphere()),
    }
}

/// The background with the configured bump, if any.
fn truth_model(cfg: &RunConfig) -> Result<SolarModel> {
    let bg = background(cfg)?;
    match &cfg.perturbation {
        None => Ok(bg),
        Some(p) => {
            let rs = bg.solar_radius();
            BumpPerturbation {
                center: p.center * rs,
                half_width: p.half_width * rs,
                dc_rel: p.dc_rel,
                drho_rel: p.drho_rel,
                dgamma: 2.0 * PI * p.dgamma_uhz * 1e-6,
            }
            .apply(&bg)
        }
    }
}

fn radial_options(cfg: &RunConfig) -> RadialOptions {
    RadialOptions { rtol: cfg.radial.rtol, ..RadialOptions::default() }
}

fn setup(cfg: &RunConfig) -> Result<(ObservationSetup, Option<SegmentPlan>)> {
    let plan = match &cfg.observe.plan {
        Some(p) => Some(segment_plan(p.total_s, p.segment_s, p.cadence_s)?),
        None => None,
    };
    let s = ObservationSetup {
        heights: cfg.observe.heights_m.clone(),
        omegas: cfg.omegas(),
        ell_max: cfg.observe.ell_max,
        n_segments: plan.map_or(cfg.observe.n_segments, |p| p.n_segments),
        pi: cfg.observe.pi.clone(),
        seed: cfg.seed,
    };
    s.validate()?;
    Ok((s, plan))
}

fn written(path: &Path) {
    println!("wrote {}", path.display());
}

pub fn forward(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = truth_model(cfg)?;
    let (setup, _) = setup(cfg)?;
    info!("exact diagonals for {} heights, ell <= {}, {} frequencies", setup.heights.len(), setup.ell_max, setup.omegas.len());
    let diag = exact_diagonals_with(&model, &setup, &radial_options(cfg))?;
    let table = extract_scattering(&diag, &model)?;
    let invalid = table.valid.iter().filter(|v| !**v).count();
    if invalid > 0 {
        log::warn!("{invalid} cells near the singular set are marked invalid");
    }
    let (dp, sp) = (out.join("diagonals.csv"), out.join("scattering.csv"));
    save_diagonal(&diag, &dp)?;
    written(&dp);
    save_scattering(&table, &sp)?;
    written(&sp);
    Ok(())
}

fn write_plan(plan: &SegmentPlan) -> String {
    format!(
        "{PLAN_HEADER}\nn_segments={}\nfreq_resolution_hz={:e}\nmax_freq_hz={:e}\n",
        plan.n_segments, plan.freq_resolution, plan.max_freq
    )
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = truth_model(cfg)?;
    let (setup, plan) = setup(cfg)?;
    let plan = plan.unwrap_or(SegmentPlan { n_segments: setup.n_segments, freq_resolution: f64::NAN, max_freq: f64::NAN });
    println!(
        "N={} freq_resolution_hz={:e} max_freq_hz={:e}",
        plan.n_segments, plan.freq_resolution, plan.max_freq
    );
    let exact = exact_diagonals_with(&model, &setup, &radial_options(cfg))?;
    let noisy = add_noise(&exact, &setup)?;
    let (dp, pp) = (out.join("diagonals.csv"), out.join("segment_plan.txt"));
    save_diagonal(&noisy, &dp)?;
    written(&dp);
    fs::write(&pp, write_plan(&plan))?;
    written(&pp);
    Ok(())
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::Discrepancy => "discrepancy",
        StopReason::ResidualFloor => "residual-floor",
        StopReason::MaxOuter => "max-outer",
    }
}

pub fn invert(cfg: &RunConfig, out: &Path) -> Result<()> {
    let path = cfg.invert.diagonals.as_ref().ok_or_else(|| Error::Config("invert.diagonals is not set".into()))?;
    let bg = background(cfg)?;
    let diag = load_diagonal(path)?;
    let data = extract_scattering(&diag, &bg)?;
    let rs = bg.solar_radius();
    let [i0, i1] = cfg.invert.interval;
    let mut fcfg = ForwardConfig::new(bg.clone(), (i0 * rs, i1 * rs), cfg.invert.n_grid, diag.ell_max, diag.omegas.clone());
    fcfg.radial = radial_options(cfg);
    let icfg = cfg.invert.irgnm(diag.is_noisy)?;
    let fwd = ForwardModel::new(fcfg)?;
    let delta = if diag.is_noisy { Some(noise_level(&diag, &bg, &data, &fwd, icfg.weight_mode)?) } else { None };
    let names: Vec<&str> = icfg.free.iter().map(|p| p.name()).collect();
    info!("inverting for {} on {} nodes, noise level {:?}", names.join(", "), cfg.invert.n_grid, delta);
    let mut res = irgnm_observed(&data, &fwd, &icfg, delta, |n, _| info!("iteration {n}"))?;
    if let Some(t) = &cfg.invert.truth {
        let truth = load_background(t, cfg.atmosphere())?;
        res = res.with_truth(&truth, &bg);
    }
    info!("stopped by {} after {} steps, residual {:e}", stop_name(res.stop), res.history.len(), res.final_residual);

    let grid = &res.u.grid;
    let profile = |f: fn(&SolarModel, f64) -> f64| grid.iter().map(|&r| f(&res.model, r)).collect::<Vec<f64>>();
    let mut report = json!({
        "format": REPORT_FORMAT,
        "free_params": names,
        "interval_m": [res.u.interval.0, res.u.interval.1],
        "n_grid": grid.len(),
        "ell_max": diag.ell_max,
        "omegas_rad_s": diag.omegas,
        "noisy": diag.is_noisy,
        "delta": res.delta,
        "stop": stop_name(res.stop),
        "final_residual": res.final_residual,
        "iterations": res.history.iter().map(|h| json!({
            "iteration": h.iteration, "alpha": h.alpha, "residual": h.residual,
        })).collect::<Vec<_>>(),
        "profiles": {
            "r_m": grid,
            "c_m_s": profile(SolarModel::sound_speed),
            "rho_kg_m3": profile(SolarModel::density),
            "gamma_rad_s": profile(SolarModel::attenuation),
            "u1": res.u.u1, "u2": res.u.u2, "u3": res.u.u3,
        },
    });
    if let Some(e) = res.errors {
        report["errors"] = json!({ "c": e[0], "rho": e[1], "gamma": e[2] });
        for (name, v) in ["c", "rho", "gamma"].iter().zip(e) {
            if let Some(v) = v {
                println!("e({name}) = {:.4}%", 100.0 * v);
            }
        }
    }
    let (rp, mp, sp) = (out.join("report.json"), out.join("model.txt"), out.join("scattering.csv"));
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&rp, text + "\n")?;
    written(&rp);
    save_background(&res.model, &mp)?;
    written(&mp);
    save_scattering(&data, &sp)?;
    written(&sp);
    Ok(())
}

pub fn singular_scan(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = background(cfg)?;
    let s = &cfg.scan;
    let omega = 2.0 * PI * s.frequency_mhz * 1e-3;
    let rs = model.solar_radius();
    let r_o = rs + s.height_m;
    let opts = ScanOptions { n_points: s.n_points, threshold: s.threshold };
    let hits = singular_set_scan(&model, omega, r_o, (rs + s.range_m[0], rs + s.range_m[1]), s.ell_max, &opts)?;
    let mut w = TableWriter::new(SCAN_HEADER, &["r_m", "ell", "abs_sin"]);
    for h in &hits {
        w.row(&[Field::F(h.r), Field::U(h.ell as u64), Field::F(h.abs_sin)]);
    }
    let p = out.join("scan.csv");
    fs::write(&p, w.finish())?;
    written(&p);
    // the configured observation pair, if it has two heights
    if let [h1, h2, ..] = cfg.observe.heights_m[..] {
        let one = ScanOptions { n_points: 1, threshold: f64::INFINITY };
        let at = singular_set_scan(&model, omega, rs + h1, (rs + h2, rs + h2), s.ell_max, &one)?;
        if let Some(pt) = at.first() {
            let ok = pt.abs_sin >= s.threshold;
            println!(
                "heights {h1} m / {h2} m: min |sin| = {:e} at ell = {} -> {}",
                pt.abs_sin,
                pt.ell,
                if ok { "admissible" } else { "near-singular" }
            );
        }
    }
    Ok(())
}

pub fn reference_model(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = truth_model(cfg)?;
    let p = out.join("model.txt");
    save_background(&model, &p)?;
    written(&p);
    Ok(())
}

pub fn specfun_probe(ell: usize, eta: f64, rho: f64) -> Result<()> {
    let (f, df, g, dg) = coulomb_fg(ell, eta, rho)?;
    println!("F={f:e} dF={df:e} G={g:e} dG={dg:e}");
    Ok(())
}
