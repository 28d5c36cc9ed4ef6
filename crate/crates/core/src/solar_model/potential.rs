use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

use super::SolarModel;
use crate::error::{Error, Result};

/// Largest tolerated |(ln w)''|·h² before the density term is considered
/// unresolved by the table.
const SMOOTHNESS_LIMIT: f64 = 0.1;

/// k = sqrt(ω²/c0² − 1/(4H²)) in 1/m.
pub fn wavenumber(model: &SolarModel, omega: f64) -> Result<f64> {
    let atm = model.atmosphere();
    let cutoff = atm.cutoff();
    if !(omega > cutoff) {
        return Err(Error::BelowCutoff { omega, cutoff });
    }
    let a = omega / atm.c0;
    let b = 0.5 / atm.scale_height;
    Ok(((a - b) * (a + b)).sqrt())
}

/// Piecewise-linear complex perturbation of v̂ in internal units, zero
/// outside its node range.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub nodes: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl Perturbation {
    #[inline]
    pub fn eval(&self, x: f64) -> Complex64 {
        let n = self.nodes.len();
        if n == 0 || x < self.nodes[0] || x > self.nodes[n - 1] {
            return Complex64::new(0.0, 0.0);
        }
        if n == 1 {
            return self.values[0];
        }
        let i = self.nodes.partition_point(|&v| v <= x).clamp(1, n - 1);
        let t = (x - self.nodes[i - 1]) / (self.nodes[i] - self.nodes[i - 1]);
        self.values[i - 1] * (1.0 - t) + self.values[i] * t
    }
}

#[derive(Clone)]
enum Interior {
    Model(Arc<SolarModel>),
    Function(Arc<dyn Fn(f64) -> Complex64 + Send + Sync>),
}

/// Schrödinger data (k, α, R_a, v) at one frequency.
///
/// Stored in SI, evaluated in internal units through [`v_hat`](Self::v_hat):
/// lengths divided by `length_unit`, potentials multiplied by its square.
/// Above R_a the potential is α/r.
#[derive(Clone)]
pub struct PotentialProfile {
    pub omega: f64,
    pub k: f64,
    pub alpha: f64,
    pub r_a: f64,
    pub length_unit: f64,
    interior: Interior,
    // internal-unit knots of the interior representation, ≤ R̂_a
    grid: Arc<Vec<f64>>,
    perturbation: Option<Arc<Perturbation>>,
    // ω²L² and 2ωL², for the model-backed interior
    w2: f64,
    two_w: f64,
}

impl fmt::Debug for PotentialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialProfile")
            .field("omega", &self.omega)
            .field("k", &self.k)
            .field("alpha", &self.alpha)
            .field("r_a", &self.r_a)
            .field("length_unit", &self.length_unit)
            .field("knots", &self.grid.len())
            .field("perturbed", &self.perturbation.is_some())
            .finish()
    }
}

/// Builds v(r) = k² − σ²/c² + ρ^{1/2}Δρ^{−1/2} with σ² = ω² + 2iωγ.
pub fn potential_from_model(model: &SolarModel, omega: f64) -> Result<PotentialProfile> {
    let k = wavenumber(model, omega)?;
    let gauge = model.density_curvature_gauge();
    if !(gauge <= SMOOTHNESS_LIMIT) {
        return Err(Error::Smoothness(format!(
            "density curvature gauge {gauge:.3e} exceeds {SMOOTHNESS_LIMIT}; refine the grid"
        )));
    }
    let l = model.solar_radius();
    let ra = model.r_a();
    let mut grid: Vec<f64> = model.grid_r().iter().filter(|&&r| r < ra).map(|r| r / l).collect();
    grid.push(ra / l);
    let p = PotentialProfile {
        omega,
        k,
        alpha: model.atmosphere().alpha(),
        r_a: ra,
        length_unit: l,
        interior: Interior::Model(Arc::new(model.clone())),
        grid: Arc::new(grid),
        perturbation: None,
        w2: omega * omega * l * l,
        two_w: 2.0 * omega * l * l,
    };
    let vmax = p.max_abs_v_hat();
    if !vmax.is_finite() {
        return Err(Error::ModelInvariant("potential is not bounded on the grid".into()));
    }
    Ok(p)
}

impl PotentialProfile {
    /// Potential given directly in internal units on (0, r_a); for test
    /// problems and toy scans.  `knots` lists points where the function is
    /// not smooth.
    pub fn from_fn(
        omega: f64,
        k: f64,
        alpha: f64,
        r_a: f64,
        length_unit: f64,
        knots: Vec<f64>,
        f: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        let mut grid = knots;
        grid.push(r_a / length_unit);
        grid.sort_by(|a, b| a.total_cmp(b));
        grid.dedup();
        PotentialProfile {
            omega,
            k,
            alpha,
            r_a,
            length_unit,
            interior: Interior::Function(Arc::new(f)),
            grid: Arc::new(grid),
            perturbation: None,
            w2: 0.0,
            two_w: 0.0,
        }
    }

    /// v ≡ 0 everywhere (α = 0), unit length scale.
    pub fn free(k: f64, r_a: f64) -> Self {
        Self::from_fn(k, k, 0.0, r_a, 1.0, Vec::new(), |_| Complex64::new(0.0, 0.0))
    }

    /// Copy with an additive interior perturbation.
    pub fn with_perturbation(&self, p: Perturbation) -> Self {
        let mut out = self.clone();
        out.perturbation = if p.nodes.is_empty() { None } else { Some(Arc::new(p)) };
        out
    }

    pub fn perturbation(&self) -> Option<&Perturbation> {
        self.perturbation.as_deref()
    }

    /// κ = kL.
    pub fn kappa(&self) -> f64 {
        self.k * self.length_unit
    }

    /// αL.
    pub fn alpha_hat(&self) -> f64 {
        self.alpha * self.length_unit
    }

    pub fn r_a_hat(&self) -> f64 {
        self.r_a / self.length_unit
    }

    /// Sommerfeld parameter η = α/(2k).
    pub fn eta(&self) -> f64 {
        self.alpha / (2.0 * self.k)
    }

    /// ω²L² and 2ωL², the weights of u1 and u3 in v̂.
    pub fn frequency_weights(&self) -> (f64, f64) {
        (self.omega * self.omega * self.length_unit.powi(2), 2.0 * self.omega * self.length_unit.powi(2))
    }

    /// Internal-unit knots of the interior representation, ending at R̂_a.
    pub fn knots(&self) -> &[f64] {
        &self.grid
    }

    /// Points the integrator must step onto: the knots of the interior
    /// representation (v̂ has kinks there), R̂_a and the perturbation nodes.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.grid.iter().copied().filter(|&x| x > 0.0).collect();
        b.push(self.r_a_hat());
        if let Some(p) = &self.perturbation {
            b.extend(p.nodes.iter().copied());
        }
        b.sort_by(|a, b| a.total_cmp(b));
        b.dedup();
        b
    }

    /// v̂ at internal radius x > 0.
    #[inline]
    pub fn v_hat(&self, x: f64) -> Complex64 {
        let ra = self.r_a_hat();
        if x >= ra {
            return Complex64::new(self.alpha_hat() / x, 0.0);
        }
        let base = match &self.interior {
            Interior::Model(m) => {
                let (u1, u2, u3) = m.parts_hat(x);
                Complex64::new(self.w2 * u1 + u2, -self.two_w * u3)
            }
            Interior::Function(f) => f(x),
        };
        match &self.perturbation {
            Some(p) => base + p.eval(x),
            None => base,
        }
    }

    /// v at radius r in SI (1/m²).
    pub fn v(&self, r: f64) -> Complex64 {
        self.v_hat(r / self.length_unit) / (self.length_unit * self.length_unit)
    }

    /// Largest |v̂| over the interior knots.
    pub fn max_abs_v_hat(&self) -> f64 {
        self.grid.iter().filter(|&&x| x > 0.0).map(|&x| self.v_hat(x).norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Atmosphere, SolarModel};
    use super::*;

    // The exponential atmosphere continued inward; ρ overflows below about
    // 0.87 R_⊙, so the table starts at 0.9 R_⊙.  ln w reaches −280 there
    // and the spline's second derivative carries roundoff ~ ε|ln w|/h², so
    // the grid is not made finer than needed.
    fn exponential_everywhere(gamma: f64) -> SolarModel {
        let atm = Atmosphere::default();
        let n = 800;
        let (r0, r1) = (0.9 * atm.solar_radius, atm.r_a());
        let r: Vec<f64> = (0..=n).map(|i| r0 + (r1 - r0) * i as f64 / n as f64).collect();
        let c = vec![atm.c0; n + 1];
        let rho = r.iter().map(|&x| atm.density(x)).collect();
        let g = r.iter().map(|&x| if x < atm.solar_radius { gamma } else { 0.0 }).collect();
        SolarModel::new(atm, r, c, rho, g).unwrap()
    }

    #[test]
    fn wavenumber_at_table_values() {
        let m = exponential_everywhere(0.0);
        let omega = 2.0 * std::f64::consts::PI * 5.3e-3;
        let want = ((omega / 6855.0f64).powi(2) - 1.0 / (4.0 * 1.25e5f64.powi(2))).sqrt();
        let k = wavenumber(&m, omega).unwrap();
        assert!((k - want).abs() < 1e-15 * want);
        assert!((k - 2.757e-6).abs() < 1e-9);
        let cut = m.atmosphere().cutoff();
        assert!(matches!(wavenumber(&m, cut), Err(Error::BelowCutoff { .. })));
    }

    #[test]
    fn exponential_density_gives_coulomb_potential() {
        let m = exponential_everywhere(0.0);
        let p = potential_from_model(&m, 2.0 * std::f64::consts::PI * 5.3e-3).unwrap();
        assert_eq!(p.alpha, 8e-6);
        for i in 0..200 {
            let r = m.r_a() * (0.92 + 0.08 * i as f64 / 199.0);
            let v = p.v(r);
            let want = 1.0 / (1.25e5 * r);
            assert!((v.re - want).abs() < 1e-8 * want, "r {r}: {} vs {want}", v.re);
            assert_eq!(v.im, 0.0);
        }
        let ra = m.r_a();
        let below = p.v(ra * (1.0 - 1e-12)).re;
        assert!((below - 8e-6 / ra).abs() < 1e-6 * 8e-6 / ra);
        for i in 0..50 {
            let r = ra * (1.0 + i as f64 / 49.0);
            assert!((p.v(r).re - 8e-6 / r).abs() <= 1e-15 * 8e-6 / r);
        }
    }

    #[test]
    fn attenuation_only_moves_imaginary_part() {
        let g = 2.0 * std::f64::consts::PI * 102.5e-6;
        let omega = 2.0 * std::f64::consts::PI * 5.3e-3;
        let a = potential_from_model(&exponential_everywhere(0.0), omega).unwrap();
        let b = potential_from_model(&exponential_everywhere(g), omega).unwrap();
        let r = 0.95 * 6.957e8;
        let dv = b.v(r) - a.v(r);
        assert_eq!(dv.re, 0.0);
        let want = -2.0 * omega * g / (6855.0f64 * 6855.0);
        assert!((dv.im - want).abs() < 1e-9 * want.abs());
    }

    #[test]
    fn coarse_density_is_rejected() {
        let atm = Atmosphere::default();
        let ra = atm.r_a();
        let r = vec![0.95 * ra, 0.96 * ra, 0.97 * ra, 0.98 * ra, atm.solar_radius, ra];
        let c = vec![atm.c0; 6];
        let mut rho: Vec<f64> = r.iter().map(|&x| atm.density(x)).collect();
        rho[2] *= 1e6;
        let m = SolarModel::new(atm, r, c, rho, vec![0.0; 6]).unwrap();
        let e = potential_from_model(&m, 0.04).unwrap_err();
        assert!(matches!(e, Error::Smoothness(_)), "{e}");
    }

    #[test]
    fn perturbation_is_piecewise_linear_and_local() {
        let p = Perturbation {
            nodes: vec![0.9, 0.92, 0.95],
            values: vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, -1.0), Complex64::new(0.0, 0.0)],
        };
        assert_eq!(p.eval(0.89), Complex64::new(0.0, 0.0));
        assert!((p.eval(0.91) - Complex64::new(2.0, -0.5)).norm() < 1e-12);
        assert_eq!(p.eval(0.92), Complex64::new(3.0, -1.0));
        let free = PotentialProfile::free(1.0, 1.0).with_perturbation(p);
        assert!((free.v_hat(0.935) - Complex64::new(1.5, -0.5)).norm() < 1e-12);
        assert_eq!(free.breakpoints(), vec![0.9, 0.92, 0.95, 1.0]);
    }
}
