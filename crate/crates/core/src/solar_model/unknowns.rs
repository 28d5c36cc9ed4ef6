use num_complex::Complex64;

use super::SolarModel;
use crate::error::{Error, Result};

/// Uniform grid of `n` nodes on the inversion interval [A1, A2] (m),
/// endpoints included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnknownGrid {
    pub a1: f64,
    pub a2: f64,
    pub n: usize,
}

impl UnknownGrid {
    pub fn new(a1: f64, a2: f64, n: usize) -> Result<Self> {
        if !(a1 > 0.0 && a2 > a1 && n >= 2) {
            return Err(Error::Config(format!(
                "inversion interval [{a1}, {a2}] with {n} nodes is not usable"
            )));
        }
        Ok(UnknownGrid { a1, a2, n })
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = (self.a2 - self.a1) / (self.n - 1) as f64;
        (0..self.n).map(|i| if i + 1 == self.n { self.a2 } else { self.a1 + h * i as f64 }).collect()
    }

    pub fn spacing(&self) -> f64 {
        (self.a2 - self.a1) / (self.n - 1) as f64
    }
}

/// u1 = 1/c0² − 1/c², u2 = ρ^{1/2}Δρ^{−1/2} − 1/(4H²), u3 = γ/c² at the
/// nodes of an [`UnknownGrid`], in SI.
#[derive(Clone, Debug, PartialEq)]
pub struct InversionUnknowns {
    pub interval: (f64, f64),
    pub grid: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub u3: Vec<f64>,
}

impl InversionUnknowns {
    /// Nodewise difference self − other on the same grid.
    pub fn minus(&self, other: &Self) -> Self {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        InversionUnknowns {
            interval: self.interval,
            grid: self.grid.clone(),
            u1: d(&self.u1, &other.u1),
            u2: d(&self.u2, &other.u2),
            u3: d(&self.u3, &other.u3),
        }
    }

    /// ω²u1 + u2 − 2iωu3 at every node, in 1/m².
    pub fn potential(&self, omega: f64) -> Vec<Complex64> {
        (0..self.grid.len())
            .map(|i| Complex64::new(omega * omega * self.u1[i] + self.u2[i], -2.0 * omega * self.u3[i]))
            .collect()
    }
}

/// Relative tolerance for "agree outside the interval".
const SUPPORT_TOL: f64 = 1e-10;

/// Unknowns of `model` on `grid`, after checking that `model` differs from
/// `background` only inside [A1, A2].
///
/// The comparison runs over the knots of both tables, so both should share
/// one radial grid outside the interval.
pub fn unknowns_from_model(
    model: &SolarModel,
    background: &SolarModel,
    grid: &UnknownGrid,
) -> Result<InversionUnknowns> {
    if model.atmosphere() != background.atmosphere() {
        return Err(Error::SupportViolation("atmosphere constants differ".into()));
    }
    let ra = model.r_a();
    let gscale = background
        .gamma()
        .iter()
        .chain(model.gamma())
        .fold(0.0f64, |a, g| a.max(g.abs()))
        .max(f64::MIN_POSITIVE);
    let outside = |r: f64| (r < grid.a1 || r > grid.a2) && r < ra;
    for &r in model.grid_r().iter().chain(background.grid_r()).filter(|&&r| outside(r)) {
        let dc = (model.sound_speed(r) / background.sound_speed(r) - 1.0).abs();
        let dr = (model.density(r) / background.density(r) - 1.0).abs();
        let dg = (model.attenuation(r) - background.attenuation(r)).abs() / gscale;
        if dc > SUPPORT_TOL || dr > SUPPORT_TOL || dg > SUPPORT_TOL {
            return Err(Error::SupportViolation(format!(
                "at r = {r} m: relative differences c {dc:.2e}, rho {dr:.2e}, gamma {dg:.2e}"
            )));
        }
    }
    let l = model.solar_radius();
    let nodes = grid.nodes();
    let mut out = InversionUnknowns {
        interval: (grid.a1, grid.a2),
        grid: nodes.clone(),
        u1: Vec::with_capacity(grid.n),
        u2: Vec::with_capacity(grid.n),
        u3: Vec::with_capacity(grid.n),
    };
    for &r in &nodes {
        let (u1, u2, u3) = if r >= ra {
            (0.0, 1.0 / (model.atmosphere().scale_height * r), 0.0)
        } else {
            let (a, b, c) = model.parts_hat(r / l);
            (a, b / (l * l), c)
        };
        out.u1.push(u1);
        out.u2.push(u2);
        out.u3.push(u3);
    }
    Ok(out)
}
