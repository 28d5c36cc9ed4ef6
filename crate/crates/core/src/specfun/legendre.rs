use crate::error::{Error, Result};

/// Legendre polynomial P_ℓ(s) by upward three-term recurrence.
pub fn legendre_p(ell: usize, s: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("legendre argument {s} outside [-1, 1]")));
    }
    Ok(legendre_all(ell, s)[ell])
}

/// P_0(s), …, P_lmax(s).
pub fn legendre_all(lmax: usize, s: f64) -> Vec<f64> {
    let mut v = vec![0.0; lmax + 1];
    legendre_into(s, &mut v);
    v
}

/// Fills `out[ℓ] = P_ℓ(s)` for ℓ < out.len().
pub fn legendre_into(s: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = s;
    for l in 1..out.len() - 1 {
        let lf = l as f64;
        out[l + 1] = ((2.0 * lf + 1.0) * s * out[l] - lf * out[l - 1]) / (lf + 1.0);
    }
}

/// Gauss–Legendre nodes (ascending) and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n.
        let k = i as f64 + 1.0;
        let theta = std::f64::consts::PI * (k - 0.25) / (nf + 0.5);
        let mut z = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wt = 2.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - i] = z;
        x[i] = -z;
        w[i] = wt;
        w[n - 1 - i] = wt;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for l in 1..n {
        let lf = l as f64;
        let p2 = ((2.0 * lf + 1.0) * z * p1 - lf * p0) / (lf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (z * p1 - p0) / (z * z - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders() {
        assert_eq!(legendre_p(0, 0.3).unwrap(), 1.0);
        assert_eq!(legendre_p(1, -0.7).unwrap(), -0.7);
        assert!((legendre_p(2, 0.5).unwrap() + 0.125).abs() < 1e-16);
        assert!(legendre_p(3, 1.5).is_err());
    }

    #[test]
    fn quadrature_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((i12 - 2.0 / 13.0).abs() < 1e-14);
        for win in x.windows(2) {
            assert!(win[0] < win[1]);
        }
    }
}
