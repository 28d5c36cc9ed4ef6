//! Closed-form stand-in for a standard solar model, joined smoothly to the
//! isothermal atmosphere at R_⊙.
//!
//! Depth is measured through D(r) = R_⊙·f(r/R_⊙) with
//! f(x) = ¾(1−x²) − ⅛(1−x⁴), which behaves like R_⊙ − r at the surface and
//! is even in r.  Then
//!
//! c² = c0² + K·D²/(D + D0)·(1 + D/D1),
//! ln ρ = ln ρ(R_⊙) + 3 ln(1 + D/3H) + D²/(6H²)·e^{−D/3H},
//!
//! so ln ρ matches the atmosphere to second order at the surface and c to
//! first order.  Values inside are within a factor of about two of a real
//! model, which is all the scattering pipeline needs.

use super::{Atmosphere, SolarModel};
use crate::error::Result;
use std::f64::consts::PI;

const K_SOUND: f64 = 183.0;
const D1: f64 = 1.2e8;

/// Background attenuation 2π·102.5 μHz.
pub const GAMMA0: f64 = 2.0 * PI * 102.5e-6;
/// Width of the attenuation taper above R_⊙, m.
const GAMMA_TAPER: f64 = 1.0e5;

fn depth(r: f64, rs: f64) -> f64 {
    let x = r / rs;
    let x2 = x * x;
    rs * (0.75 * (1.0 - x2) - 0.125 * (1.0 - x2 * x2))
}

fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// (c, ρ, γ) of the reference background at radius r (m).
pub fn reference_values(atm: &Atmosphere, r: f64) -> (f64, f64, f64) {
    let rs = atm.solar_radius;
    let h = atm.scale_height;
    if r >= atm.r_a() {
        return (atm.c0, atm.density(r), 0.0);
    }
    if r >= rs {
        let g = GAMMA0 * (1.0 - smoothstep5((r - rs) / GAMMA_TAPER));
        return (atm.c0, atm.density(r), g);
    }
    let d = depth(r, rs);
    let d0 = 2.0 * h;
    let c2 = atm.c0 * atm.c0 + K_SOUND * d * d / (d + d0) * (1.0 + d / D1);
    let ln_rho_s = atm.rho0.ln() + atm.interface_height / h;
    let ln_rho = ln_rho_s + 3.0 * (d / (3.0 * h)).ln_1p() + d * d / (6.0 * h * h) * (-d / (3.0 * h)).exp();
    (c2.sqrt(), ln_rho.exp(), GAMMA0)
}

/// Radial grid: ~0.002 R_⊙ in the deep interior, 0.0004 R_⊙ across
/// [0.85, 0.97] R_⊙, spacing proportional to the local density scale
/// near the surface and H/20 in the atmosphere below R_a.
pub fn reference_grid(atm: &Atmosphere) -> Vec<f64> {
    let rs = atm.solar_radius;
    let h = atm.scale_height;
    let mut r = Vec::new();
    let mut x = 0.002 * rs;
    while x < 0.85 * rs {
        r.push(x);
        x += 0.002 * rs;
    }
    x = 0.85 * rs;
    while x < 0.97 * rs {
        r.push(x);
        x += 0.0004 * rs;
    }
    x = 0.97 * rs;
    while x < rs {
        r.push(x);
        let z = rs - x;
        x += 0.03 * (h + z / 3.0);
    }
    let n_atm = (atm.interface_height / (h / 20.0)).round() as usize;
    for i in 0..=n_atm {
        r.push(rs + atm.interface_height * i as f64 / n_atm as f64);
    }
    r
}

/// The reference background with the given atmosphere.
pub fn reference_background(atm: Atmosphere) -> Result<SolarModel> {
    let r = reference_grid(&atm);
    let mut c = Vec::with_capacity(r.len());
    let mut rho = Vec::with_capacity(r.len());
    let mut g = Vec::with_capacity(r.len());
    for &x in &r {
        let (a, b, d) = reference_values(&atm, x);
        c.push(a);
        rho.push(b);
        g.push(d);
    }
    SolarModel::new(atm, r, c, rho, g)
}

/// Compactly supported C² bump (1 − t²)³ centred at `center` with
/// half-width `half_width`.
pub fn bump(r: f64, center: f64, half_width: f64) -> f64 {
    let t = (r - center) / half_width;
    if t.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - t * t;
        s * s * s
    }
}

/// Relative perturbation amplitudes of c and ρ and absolute one of γ
/// (rad/s), all shaped by one bump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpPerturbation {
    pub center: f64,
    pub half_width: f64,
    pub dc_rel: f64,
    pub drho_rel: f64,
    pub dgamma: f64,
}

impl BumpPerturbation {
    /// Bump centred in [0.9, 0.95] R_⊙ with support strictly inside it.
    pub fn standard(atm: &Atmosphere, dc_rel: f64, drho_rel: f64, dgamma: f64) -> Self {
        BumpPerturbation {
            center: 0.925 * atm.solar_radius,
            half_width: 0.02 * atm.solar_radius,
            dc_rel,
            drho_rel,
            dgamma,
        }
    }

    pub fn apply(&self, background: &SolarModel) -> Result<SolarModel> {
        background.map_rows(|r, c, rho, g| {
            let b = bump(r, self.center, self.half_width);
            (c * (1.0 + self.dc_rel * b), rho * (1.0 + self.drho_rel * b), g + self.dgamma * b)
        })
    }
}
