use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

// B_{2m} / (2m (2m-1)) for m = 1..10.
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
];

/// Continuous branch of ln Γ(z) for Re z > 0.
///
/// The imaginary part is the analytic continuation from the real axis, so it
/// is not reduced modulo 2π.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    assert!(z.re > 0.0, "ln_gamma needs Re z > 0");
    let mut shift = Complex64::new(0.0, 0.0);
    let mut w = z;
    // Stirling with 10 terms is good to ~1e-17 once |w| >= 16.
    while w.norm() < 16.0 {
        shift += w.ln();
        w += 1.0;
    }
    let inv = 1.0 / w;
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut p = inv;
    for c in STIRLING {
        series += p * c;
        p *= inv2;
    }
    (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln() + series - shift
}

/// σ_ℓ(η) on the branch that is continuous in η and vanishes at η = 0.
pub fn coulomb_sigma_continuous(ell: usize, eta: f64) -> f64 {
    if eta == 0.0 {
        return 0.0;
    }
    ln_gamma(Complex64::new(ell as f64 + 1.0, eta)).im
}

/// Coulomb phase shift σ_ℓ(η) = arg Γ(ℓ+1+iη), reduced to (−π, π].
pub fn coulomb_sigma(ell: usize, eta: f64) -> Result<f64> {
    if !eta.is_finite() || eta.abs() > 100.0 {
        return Err(Error::Domain(format!("|eta| = {eta} exceeds 100")));
    }
    Ok(reduce_angle(coulomb_sigma_continuous(ell, eta)))
}

/// Reduces an angle to (−π, π].
pub fn reduce_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x.rem_euclid(two_pi);
    if y > PI {
        y -= two_pi;
    }
    y
}
