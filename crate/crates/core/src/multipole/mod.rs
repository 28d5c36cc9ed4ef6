//! Three-dimensional Green's function on a sphere of radius R from its
//! partial waves, and back.
//!
//! With t = cos θ the two are related by
//!
//! G(θ) = (1/4πR²)·Σ_ℓ (2ℓ+1)·G_ℓ(R,R)·P_ℓ(t),
//! G_ℓ(R,R) = R/(2ℓ+1) + 2πR²·∫₋₁¹ g(t)·P_ℓ(t) dt,
//!
//! where g = G − 1/(4πR·√(2−2t)) has the coincidence singularity removed.
//! The kernel is exactly the series with G_ℓ = R/(2ℓ+1), which is also the
//! large-ℓ limit of every partial wave.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::{gauss_legendre, legendre_into};
use crate::table::{self, Field, TableWriter};
use libm::erfc;

type C = Complex64;

/// Default width of the excluded bands at θ = 0 and θ = π.
pub const THETA_MIN: f64 = 1e-3;
/// Tail contributions above this fraction of the value raise a warning.
pub const TAIL_WARNING: f64 = 1e-2;
/// Extra quadrature nodes beyond 2·L_max required for extraction.
pub const NODE_MARGIN: usize = 32;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// G sampled on a great circle of the sphere |x| = R, as a function of the
/// angle between the two points.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleSamples {
    pub r: f64,
    pub thetas: Vec<f64>,
    pub values: Vec<C>,
}

/// G_ℓ(R,R) for ℓ = 0..=L_max.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialWaveDiagonal {
    pub r: f64,
    pub values: Vec<C>,
}

impl PartialWaveDiagonal {
    pub fn l_max(&self) -> usize {
        self.values.len() - 1
    }

    /// |G_L·(2L+1)/R − 1| at L = L_max.
    pub fn asymptotic_deviation(&self) -> f64 {
        let l = self.l_max();
        (self.values[l] * ((2 * l + 1) as f64 / self.r) - 1.0).norm()
    }

    /// Whether the last partial wave is close to its large-ℓ limit, within
    /// 5/L_max.
    pub fn tail_is_asymptotic(&self) -> bool {
        self.asymptotic_deviation() <= 5.0 / self.l_max().max(1) as f64
    }
}

/// How the partial waves beyond L_max are modelled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailModel {
    /// G_ℓ = R/(2ℓ+1).
    Leading,
    /// G_ℓ = R/(2·√(ν² + q + p/ν² + s/ν⁴)), ν = ℓ + ½, fitted to G_L,
    /// G_{L−L/4} and G_{L−L/2}.
    Fitted { q: C, p: C, s: C },
}

impl TailModel {
    /// Fits the asymptotic model; falls back to the leading one when the
    /// data do not look asymptotic.
    pub fn fit(diag: &PartialWaveDiagonal) -> TailModel {
        let l = diag.l_max();
        if l < 8 {
            return TailModel::Leading;
        }
        // the 1/ν² terms are small and poorly determined by neighbours, so
        // the fit points are spread out
        let pts = [l - l / 2, l - l / 4, l];
        let mut m = nalgebra::Matrix3::<C>::zeros();
        let mut b = nalgebra::Vector3::<C>::zeros();
        for (i, &ell) in pts.iter().enumerate() {
            let a = (ell as f64 + 0.5).powi(2);
            let y = (C::new(diag.r, 0.0) / (diag.values[ell] * 2.0)).powi(2);
            m[(i, 0)] = C::new(1.0, 0.0);
            m[(i, 1)] = C::new(1.0 / a, 0.0);
            m[(i, 2)] = C::new(1.0 / (a * a), 0.0);
            b[i] = y - a;
        }
        let a2 = (l as f64 + 0.5).powi(2);
        let Some(x) = m.lu().solve(&b) else { return TailModel::Leading };
        let (q, p, s) = (x[0], x[1], x[2]);
        let d = q + p / a2 + s / (a2 * a2);
        let ok = x.iter().all(|v| v.is_finite()) && (d / a2).norm() < 0.5;
        if ok {
            TailModel::Fitted { q, p, s }
        } else {
            TailModel::Leading
        }
    }

    /// c_ℓ with G_ℓ = R/(2ℓ+1)·(1 + c_ℓ).
    fn correction(&self, ell: usize) -> C {
        match *self {
            TailModel::Leading => C::new(0.0, 0.0),
            TailModel::Fitted { q, p, s } => {
                let nu = ell as f64 + 0.5;
                let a = nu * nu;
                // ν/√(ν² + d) − 1 without cancellation
                let d = (q + (p + s / a) / a) / a;
                let r = (C::new(1.0, 0.0) + d).sqrt();
                -d / (r * (r + 1.0))
            }
        }
    }
}

/// Diagnostics of one assembly.
#[derive(Clone, Debug, PartialEq)]
pub struct AssemblyReport {
    pub tail: TailModel,
    /// Largest |model-dependent tail| / |value| over the samples.
    pub max_tail_fraction: f64,
    /// Raised when the tail fraction exceeds [`TAIL_WARNING`] or the last
    /// partial wave is not yet asymptotic.
    pub warning: bool,
}

/// 1/(4πR·√(2−2cos θ)), the coincidence kernel.
pub fn singular_kernel(r: f64, theta: f64) -> f64 {
    1.0 / (FOUR_PI * r * 2.0 * (0.5 * theta).sin())
}

fn check_band(thetas: &[f64], theta_min: f64) -> Result<()> {
    for &t in thetas {
        if !(t >= theta_min && t <= std::f64::consts::PI - theta_min) {
            return Err(Error::ExcludedBand(t));
        }
    }
    Ok(())
}

/// Σ_{ℓ>L} c_ℓ·P_ℓ(cos θ).  The series converges slowly, so it is summed
/// with an erfc taper of width σ: the error then falls like exp(−σ²θ²/4)
/// with θ the distance to the nearer pole.
fn tail_correction(tail: &TailModel, l_max: usize, theta: f64, p_l: f64, p_lm1: f64) -> C {
    if matches!(tail, TailModel::Leading) {
        return C::new(0.0, 0.0);
    }
    let gap = theta.min(std::f64::consts::PI - theta);
    let sigma = (12.0 / gap).max(200.0);
    let center = l_max as f64 + 6.5 * sigma;
    let end = (center + 6.5 * sigma).ceil() as usize;
    let t = theta.cos();
    let (mut p0, mut p1) = (p_lm1, p_l);
    let mut acc = C::new(0.0, 0.0);
    for l in l_max..end {
        let lf = l as f64;
        let p2 = ((2.0 * lf + 1.0) * t * p1 - lf * p0) / (lf + 1.0);
        p0 = p1;
        p1 = p2;
        let ell = l + 1;
        let w = 0.5 * erfc((ell as f64 - center) / sigma);
        acc += tail.correction(ell) * (p2 * w);
    }
    acc
}

/// Sums the partial-wave series on the given angles.
pub fn assemble_circle(diag: &PartialWaveDiagonal, thetas: &[f64]) -> Result<CircleSamples> {
    assemble_circle_with(diag, thetas, THETA_MIN).map(|(s, _)| s)
}

/// [`assemble_circle`] with an explicit excluded band, also returning the
/// tail diagnostics.
pub fn assemble_circle_with(
    diag: &PartialWaveDiagonal,
    thetas: &[f64],
    theta_min: f64,
) -> Result<(CircleSamples, AssemblyReport)> {
    check_band(thetas, theta_min)?;
    if diag.values.is_empty() {
        return Err(Error::Config("no partial waves to assemble".into()));
    }
    let l_max = diag.l_max();
    let r = diag.r;
    let tail = TailModel::fit(diag);
    let mut p = vec![0.0; l_max + 1];
    let mut values = Vec::with_capacity(thetas.len());
    let mut worst: f64 = 0.0;
    for &theta in thetas {
        legendre_into(theta.cos(), &mut p);
        // Σ_{ℓ≤L} [(2ℓ+1)G_ℓ/R − 1]·P_ℓ, then add the exact kernel
        let mut acc = C::new(0.0, 0.0);
        for (l, (&g, &pl)) in diag.values.iter().zip(&p).enumerate() {
            acc += (g * ((2 * l + 1) as f64 / r) - 1.0) * pl;
        }
        let p_lm1 = if l_max > 0 { p[l_max - 1] } else { 1.0 };
        let corr = tail_correction(&tail, l_max, theta, p[l_max], p_lm1) / (FOUR_PI * r);
        let v = acc / (FOUR_PI * r) + singular_kernel(r, theta) + corr;
        worst = worst.max(corr.norm() / v.norm());
        values.push(v);
    }
    let warning = worst > TAIL_WARNING || !diag.tail_is_asymptotic();
    Ok((
        CircleSamples { r, thetas: thetas.to_vec(), values },
        AssemblyReport { tail, max_tail_fraction: worst, warning },
    ))
}

/// Angles θ_j = arccos t_j of the n-point Gauss–Legendre rule, ascending in
/// θ.
pub fn gl_thetas(n: usize) -> Vec<f64> {
    let (t, _) = gauss_legendre(n);
    t.iter().rev().map(|x| x.acos()).collect()
}

/// Recovers G_0..G_L from samples at Gauss–Legendre angles (see
/// [`gl_thetas`]).
pub fn extract_partial_waves(samples: &CircleSamples, l_max: usize) -> Result<PartialWaveDiagonal> {
    extract_partial_waves_with(samples, l_max, THETA_MIN)
}

pub fn extract_partial_waves_with(
    samples: &CircleSamples,
    l_max: usize,
    theta_min: f64,
) -> Result<PartialWaveDiagonal> {
    let n = samples.thetas.len();
    let required = 2 * l_max + NODE_MARGIN;
    if n < required {
        return Err(Error::Aliasing { nodes: n, required });
    }
    if samples.values.len() != n {
        return Err(Error::Config(format!("{} angles but {} values", n, samples.values.len())));
    }
    check_band(&samples.thetas, theta_min)?;
    let (t, w) = gauss_legendre(n);
    // samples ascend in θ, nodes ascend in cos θ
    for (j, &theta) in samples.thetas.iter().enumerate() {
        if (theta.cos() - t[n - 1 - j]).abs() > 1e-12 {
            return Err(Error::NotGaussLegendre);
        }
    }
    let r = samples.r;
    let nodes: Vec<(f64, f64)> = (0..n).map(|j| (t[n - 1 - j], w[n - 1 - j])).collect();
    let mut diag = project(samples, &nodes, l_max, |_| C::new(0.0, 0.0));
    // The partial waves beyond L alias back onto the projection.  Their
    // fitted model is summed on the nodes and removed, then refitted.
    for _ in 0..20 {
        let tail = TailModel::fit(&diag);
        if matches!(tail, TailModel::Leading) || l_max == 0 {
            break;
        }
        let mut p = vec![0.0; l_max + 1];
        let next = project(samples, &nodes, l_max, |j| {
            legendre_into(nodes[j].0, &mut p);
            tail_correction(&tail, l_max, samples.thetas[j], p[l_max], p[l_max - 1]) / (FOUR_PI * r)
        });
        let change = next
            .values
            .iter()
            .zip(&diag.values)
            .map(|(a, b)| (a - b).norm() / b.norm())
            .fold(0.0, f64::max);
        diag = next;
        if change < 1e-14 {
            break;
        }
    }
    Ok(diag)
}

/// G_ℓ = R/(2ℓ+1) + 2πR²·Σ_j w_j·(G − kernel − extra_j)·P_ℓ(t_j).
fn project(
    samples: &CircleSamples,
    nodes: &[(f64, f64)],
    l_max: usize,
    mut extra: impl FnMut(usize) -> C,
) -> PartialWaveDiagonal {
    let r = samples.r;
    let mut acc = vec![C::new(0.0, 0.0); l_max + 1];
    let mut p = vec![0.0; l_max + 1];
    for (j, (&theta, &v)) in samples.thetas.iter().zip(&samples.values).enumerate() {
        let g = v - singular_kernel(r, theta) - extra(j);
        let (tj, wj) = nodes[j];
        legendre_into(tj, &mut p);
        let gw = g * wj;
        for (a, &pl) in acc.iter_mut().zip(&p) {
            *a += gw * pl;
        }
    }
    let two_pi_r2 = 0.5 * FOUR_PI * r * r;
    let values = acc
        .iter()
        .enumerate()
        .map(|(l, &a)| a * two_pi_r2 + r / (2 * l + 1) as f64)
        .collect();
    PartialWaveDiagonal { r, values }
}

pub const CIRCLE_HEADER: &str = "# heliosolve-circle v1";
const CIRCLE_COLUMNS: [&str; 3] = ["theta_rad", "re_G", "im_G"];

pub fn write_circle(samples: &CircleSamples) -> String {
    let mut w = TableWriter::new(&format!("{CIRCLE_HEADER} R={:e}", samples.r), &CIRCLE_COLUMNS);
    for (&t, v) in samples.thetas.iter().zip(&samples.values) {
        w.row(&[Field::F(t), Field::F(v.re), Field::F(v.im)]);
    }
    w.finish()
}

pub fn parse_circle(text: &str) -> Result<CircleSamples> {
    let t = table::read_table(text, CIRCLE_HEADER, &CIRCLE_COLUMNS)?;
    let r = table::header_value(&t.header_rest, "R")
        .ok_or_else(|| Error::Parse { line: 1, msg: "missing R=<meters>".into() })
        .and_then(|s| table::parse_f64(s, 1))?;
    let mut thetas = Vec::with_capacity(t.rows.len());
    let mut values = Vec::with_capacity(t.rows.len());
    for (line, row) in &t.rows {
        let th = table::parse_f64(&row[0], *line)?;
        if thetas.last().is_some_and(|&last| th <= last) {
            return Err(Error::Parse { line: *line, msg: "theta not strictly increasing".into() });
        }
        thetas.push(th);
        values.push(C::new(table::parse_f64(&row[1], *line)?, table::parse_f64(&row[2], *line)?));
    }
    Ok(CircleSamples { r, thetas, values })
}

pub fn save_circle(samples: &CircleSamples, path: &Path) -> Result<()> {
    std::fs::write(path, write_circle(samples))?;
    Ok(())
}

pub fn load_circle(path: &Path) -> Result<CircleSamples> {
    parse_circle(&std::fs::read_to_string(path)?)
}
