//! Solar parameter triple (c, ρ, γ), its atmospheric extension and the map
//! to Schrödinger data.
//!
//! Radial computations downstream use internal units: lengths in units of
//! the solar radius and potentials multiplied by its square.

mod io;
mod potential;
pub mod reference;
mod unknowns;

pub use io::{load_background, parse_background, save_background, write_background, MODEL_HEADER};
pub use potential::{potential_from_model, wavenumber, Perturbation, PotentialProfile};
pub use unknowns::{unknowns_from_model, InversionUnknowns, UnknownGrid};

use crate::error::{Error, Result};
use crate::spline::CubicSpline;

/// Constants of the isothermal atmosphere and the solar radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atmosphere {
    /// Sound speed above the interface, m/s.
    pub c0: f64,
    /// Density at the interface, kg/m³.
    pub rho0: f64,
    /// Density scale height H, m.
    pub scale_height: f64,
    /// Interface altitude h_a above the solar radius, m.
    pub interface_height: f64,
    /// Solar radius, m.
    pub solar_radius: f64,
}

impl Default for Atmosphere {
    fn default() -> Self {
        Atmosphere {
            c0: 6855.0,
            rho0: 2.886e-6,
            scale_height: 1.25e5,
            interface_height: 5.0e5,
            solar_radius: 6.957e8,
        }
    }
}

impl Atmosphere {
    /// Interface radius R_a = R_⊙ + h_a.
    pub fn r_a(&self) -> f64 {
        self.solar_radius + self.interface_height
    }

    /// Coulomb tail coefficient α = 1/H.
    pub fn alpha(&self) -> f64 {
        1.0 / self.scale_height
    }

    /// Acoustic cutoff c0/(2H) in rad/s.
    pub fn cutoff(&self) -> f64 {
        self.c0 / (2.0 * self.scale_height)
    }

    pub fn density(&self, r: f64) -> f64 {
        self.rho0 * (-(r - self.r_a()) / self.scale_height).exp()
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.c0, self.rho0, self.scale_height, self.interface_height, self.solar_radius]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::ModelInvariant("atmosphere constants must be positive and finite".into()))
        }
    }
}

/// Tabulated background (c, ρ, γ) on an ascending radial grid, with the
/// isothermal atmosphere enforced from R_a outward.
#[derive(Clone, Debug)]
pub struct SolarModel {
    atm: Atmosphere,
    r: Vec<f64>,
    c: Vec<f64>,
    rho: Vec<f64>,
    gamma: Vec<f64>,
    // Splines in internal radius r̂ = r/R_⊙.
    c_spline: CubicSpline,
    // ln w − q(x² − x_a²) with w = ρ^{−1/2}; the quadratic has the
    // atmospheric slope at x_a and takes the bulk of the derivative, which
    // keeps roundoff in the spline's second derivative small.  All three
    // splines end at R_a.
    lnw_spline: CubicSpline,
    lnw_q: f64,
    gamma_spline: CubicSpline,
    gamma_nonneg: bool,
}

/// Number and spacing (in scale heights) of atmospheric points appended
/// beyond R_a so that spline end effects stay away from the interface.
const EXT_POINTS: usize = 8;
const EXT_SPACING_H: f64 = 0.25;

impl SolarModel {
    /// Validates a table and applies the atmospheric extension.
    ///
    /// Rows with r ≥ R_a are overwritten by the atmosphere, and rows are
    /// appended up to R_a + 2H if the table stops short of that.
    pub fn new(
        atm: Atmosphere,
        r: Vec<f64>,
        c: Vec<f64>,
        rho: Vec<f64>,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        atm.validate()?;
        let n = r.len();
        if n < 2 || c.len() != n || rho.len() != n || gamma.len() != n {
            return Err(Error::ModelInvariant("columns must have equal length >= 2".into()));
        }
        if !(r[0] > 0.0) {
            return Err(Error::ModelInvariant("radii must be positive".into()));
        }
        for i in 1..n {
            if !(r[i] > r[i - 1]) {
                return Err(Error::ModelInvariant(format!(
                    "grid not strictly increasing at row {}",
                    i + 1
                )));
            }
        }
        for i in 0..n {
            if !(c[i] > 0.0) || !c[i].is_finite() {
                return Err(Error::ModelInvariant(format!("non-positive sound speed at r = {}", r[i])));
            }
            if !(rho[i] > 0.0) || !rho[i].is_finite() {
                return Err(Error::ModelInvariant(format!("non-positive density at r = {}", r[i])));
            }
            if !gamma[i].is_finite() {
                return Err(Error::ModelInvariant(format!("non-finite attenuation at r = {}", r[i])));
            }
        }
        let ra = atm.r_a();
        if r[n - 1] < ra {
            return Err(Error::ModelInvariant(format!(
                "last grid point {} below R_a = {ra}",
                r[n - 1]
            )));
        }
        // Continuity with the atmosphere at R_a, judged on the raw table.
        let (rho_ra, c_ra) = interp_at(&r, &rho, &c, ra);
        if ((rho_ra - atm.rho0) / atm.rho0).abs() > 0.01 {
            return Err(Error::ModelInvariant(format!(
                "density at R_a is {rho_ra}, atmosphere requires rho0 = {} within 1%",
                atm.rho0
            )));
        }
        if ((c_ra - atm.c0) / atm.c0).abs() > 0.01 {
            return Err(Error::ModelInvariant(format!(
                "sound speed at R_a is {c_ra}, atmosphere requires c0 = {} within 1%",
                atm.c0
            )));
        }

        let (mut r, mut c, mut rho, mut gamma) = (r, c, rho, gamma);
        // R_a itself is always a knot; the splines end there.
        let at = r.partition_point(|&v| v < ra);
        if r[at] != ra {
            r.insert(at, ra);
            c.insert(at, atm.c0);
            rho.insert(at, atm.rho0);
            gamma.insert(at, 0.0);
        }
        let n = r.len();
        for i in 0..n {
            if r[i] >= ra {
                c[i] = atm.c0;
                rho[i] = atm.density(r[i]);
                gamma[i] = 0.0;
            }
        }
        let step = EXT_SPACING_H * atm.scale_height;
        let reach = ra + EXT_POINTS as f64 * step;
        let mut next = r[r.len() - 1] + step;
        while r[r.len() - 1] < reach * (1.0 - 1e-15) {
            r.push(next);
            c.push(atm.c0);
            rho.push(atm.density(next));
            gamma.push(0.0);
            next += step;
        }
        Self::from_parts(atm, r, c, rho, gamma)
    }

    fn from_parts(
        atm: Atmosphere,
        r: Vec<f64>,
        c: Vec<f64>,
        rho: Vec<f64>,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        let l = atm.solar_radius;
        let ra = atm.r_a();
        let na = r.partition_point(|&v| v <= ra);
        let x: Vec<f64> = r[..na].iter().map(|v| v / l).collect();
        let xa = ra / l;
        let lnw_q = l / (4.0 * atm.scale_height * xa);
        let g: Vec<f64> =
            rho[..na].iter().zip(&x).map(|(v, xi)| -0.5 * v.ln() - lnw_q * (xi - xa) * (xi + xa)).collect();
        let c_spline = CubicSpline::new_even(&x, &c[..na]);
        // (ln w)' = L/(2H) at R_a is exactly what the quadratic carries
        let lnw_spline = CubicSpline::new_even_with_end_slope(&x, &g, 0.0);
        let gamma_spline = CubicSpline::new_even(&x, &gamma[..na]);
        let gamma_nonneg = gamma.iter().all(|&g| g >= 0.0);
        Ok(SolarModel { atm, r, c, rho, gamma, c_spline, lnw_spline, lnw_q, gamma_spline, gamma_nonneg })
    }

    /// New model on the same grid with every interior row transformed by
    /// `f(r, c, ρ, γ) -> (c, ρ, γ)`.  Rows at or above R_a are left to the
    /// atmosphere.
    pub fn map_rows(&self, f: impl Fn(f64, f64, f64, f64) -> (f64, f64, f64)) -> Result<Self> {
        let ra = self.atm.r_a();
        let mut c = self.c.clone();
        let mut rho = self.rho.clone();
        let mut gamma = self.gamma.clone();
        for i in 0..self.r.len() {
            if self.r[i] < ra {
                let (a, b, g) = f(self.r[i], c[i], rho[i], gamma[i]);
                c[i] = a;
                rho[i] = b;
                gamma[i] = g;
            }
        }
        SolarModel::new(self.atm, self.r.clone(), c, rho, gamma)
    }

    /// Same physics with radii divided and frequencies multiplied by
    /// `factor`.  Dimensionless scattering data are unchanged.
    pub fn compressed(&self, factor: f64) -> Result<Self> {
        let mut atm = self.atm;
        atm.scale_height /= factor;
        atm.interface_height /= factor;
        atm.solar_radius /= factor;
        let r = self.r.iter().map(|v| v / factor).collect();
        let gamma = self.gamma.iter().map(|v| v * factor).collect();
        SolarModel::new(atm, r, self.c.clone(), self.rho.clone(), gamma)
    }

    pub fn atmosphere(&self) -> &Atmosphere {
        &self.atm
    }
    pub fn grid_r(&self) -> &[f64] {
        &self.r
    }
    pub fn c(&self) -> &[f64] {
        &self.c
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    pub fn solar_radius(&self) -> f64 {
        self.atm.solar_radius
    }
    pub fn r_a(&self) -> f64 {
        self.atm.r_a()
    }

    /// Sound speed at radius r (m).
    pub fn sound_speed(&self, r: f64) -> f64 {
        if r >= self.r_a() {
            self.atm.c0
        } else {
            self.c_spline.eval(r / self.atm.solar_radius)
        }
    }

    pub fn density(&self, r: f64) -> f64 {
        if r >= self.r_a() {
            self.atm.density(r)
        } else {
            let x = r / self.atm.solar_radius;
            let xa = self.r_a() / self.atm.solar_radius;
            (-2.0 * (self.lnw_spline.eval(x) + self.lnw_q * (x - xa) * (x + xa))).exp()
        }
    }

    pub fn attenuation(&self, r: f64) -> f64 {
        if r >= self.r_a() {
            0.0
        } else {
            let g = self.gamma_spline.eval(r / self.atm.solar_radius);
            if self.gamma_nonneg { g.max(0.0) } else { g }
        }
    }

    /// ρ^{1/2}Δ(ρ^{−1/2}) − 1/(4H²) at r (m), in 1/m².
    pub fn density_term(&self, r: f64) -> f64 {
        if r >= self.r_a() {
            return 1.0 / (self.atm.scale_height * r);
        }
        let l = self.atm.solar_radius;
        self.parts_hat(r / l).1 / (l * l)
    }

    /// (1/c0² − 1/c², L²·density term, γ/c²) at internal radius x < R̂_a.
    /// The first and last are SI; the middle one is already scaled.
    pub(crate) fn parts_hat(&self, x: f64) -> (f64, f64, f64) {
        let i = self.c_spline.interval(x);
        let c = self.c_spline.eval3_in(i, x).0;
        let (_, dg, ddg) = self.lnw_spline.eval3_in(i, x);
        let mut g = self.gamma_spline.eval3_in(i, x).0;
        if self.gamma_nonneg && g < 0.0 {
            // spline undershoot next to a taper
            g = 0.0;
        }
        let inv_c2 = 1.0 / (c * c);
        let xa = self.r_a() / self.atm.solar_radius;
        // (ln w)' = g' + 2qx and (ln w)' − L/(2H) = g' + 2q(x − x_a)
        let q2 = 2.0 * self.lnw_q;
        let d = dg + q2 * x;
        let d_minus = dg + q2 * (x - xa);
        let dd = ddg + q2;
        let term = dd + d_minus * (d + q2 * xa) + 2.0 * d / x;
        (1.0 / (self.atm.c0 * self.atm.c0) - inv_c2, term, g * inv_c2)
    }

    /// Resolution gauge of the ln ρ representation: largest |g''|·h², g the
    /// spline part of ln w,
    /// over the knot intervals of the table (the mirrored copy and the
    /// interval straddling the centre are skipped).
    pub fn density_curvature_gauge(&self) -> f64 {
        self.lnw_spline.curvature_gauge(self.r[0] / self.atm.solar_radius)
    }

    /// Inserts the spline midpoint of every interior knot interval, so the
    /// represented functions change only by interpolation error.
    pub fn refined(&self) -> Result<Self> {
        let ra = self.r_a();
        let mut r = Vec::with_capacity(2 * self.r.len());
        for w in self.r.windows(2) {
            r.push(w[0]);
            if w[1] <= ra {
                r.push(0.5 * (w[0] + w[1]));
            }
        }
        r.push(self.r[self.r.len() - 1]);
        let c = r.iter().map(|&x| self.sound_speed(x)).collect();
        let rho = r.iter().map(|&x| self.density(x)).collect();
        let gamma = r.iter().map(|&x| self.attenuation(x)).collect();
        SolarModel::new(self.atm, r, c, rho, gamma)
    }
}

fn interp_at(r: &[f64], rho: &[f64], c: &[f64], at: f64) -> (f64, f64) {
    let i = r.partition_point(|&v| v < at);
    if i < r.len() && r[i] == at {
        return (rho[i], c[i]);
    }
    let i = i.max(1);
    let t = (at - r[i - 1]) / (r[i] - r[i - 1]);
    let lr = rho[i - 1].ln() * (1.0 - t) + rho[i].ln() * t;
    (lr.exp(), c[i - 1] * (1.0 - t) + c[i] * t)
}

/// Lengths in units of the solar radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Units {
    pub length: f64,
}

impl Units {
    pub fn to_internal(&self, r: f64) -> f64 {
        r / self.length
    }
    pub fn to_si(&self, x: f64) -> f64 {
        x * self.length
    }
    /// Wavenumber k (1/m) to κ = kL.
    pub fn kappa(&self, k: f64) -> f64 {
        k * self.length
    }
    pub fn k_from_kappa(&self, kappa: f64) -> f64 {
        kappa / self.length
    }
}
