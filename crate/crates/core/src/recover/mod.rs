//! Scattering coefficients from Im G at two heights.
//!
//! Above the interface the outgoing solution is H⁺ and the regular one is
//! b(H⁻ − sH⁺), so
//!
//! Im G(r,r) = (|H⁺|² − Re(s·H⁺²))/(2k).
//!
//! Writing H⁺² = |H⁺|²·e^{iϑ} turns each height into one real equation
//! cos ϑ·Re s − sin ϑ·Im s = (|H⁺|² − 2k·Im G)/|H⁺|², and two heights give
//! a 2×2 system with determinant ±sin(ϑ₂ − ϑ₁).

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::observe::GreensDiagonal;
use crate::solar_model::{wavenumber, SolarModel};
use crate::specfun::coulomb_h_range;
use crate::table::{self, Field, TableWriter};

type C = Complex64;

/// Systems with |sin(ϑ₂ − ϑ₁)| below this are not solved.
pub const DET_MIN: f64 = 1e-6;
/// Default threshold of [`singular_set_scan`].
pub const SCAN_THRESHOLD: f64 = 1e-3;

/// The two real equations for one (ℓ, ω).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoHeightSystem {
    pub ell: usize,
    pub omega: f64,
    /// ϑ_ℓ(η, kr) = 2·arg H⁺ at the two radii.
    pub vartheta: [f64; 2],
    pub rhs: [f64; 2],
    /// sin(ϑ₂ − ϑ₁).
    pub det: f64,
    /// ∂rhs_i/∂Im G_i = −2k/|H⁺(kr_i)|².
    pub sensitivity: [f64; 2],
}

impl TwoHeightSystem {
    /// Rows (cos ϑ_i, −sin ϑ_i).
    pub fn row(&self, i: usize) -> (f64, f64) {
        (self.vartheta[i].cos(), -self.vartheta[i].sin())
    }

    /// Solves for s; `None` when |det| < `det_min`.
    pub fn solve(&self, det_min: f64) -> Option<C> {
        if !(self.det.abs() >= det_min) {
            return None;
        }
        let (a, b) = self.row(0);
        let (c, d) = self.row(1);
        let m = a * d - b * c;
        let re = (self.rhs[0] * d - b * self.rhs[1]) / m;
        let im = (a * self.rhs[1] - c * self.rhs[0]) / m;
        Some(C::new(re, im))
    }

    /// Largest |row·(Re s, Im s) − rhs|.
    pub fn residual(&self, s: C) -> f64 {
        (0..2)
            .map(|i| {
                let (a, b) = self.row(i);
                (a * s.re + b * s.im - self.rhs[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Standard deviation of (Re s, Im s) when the two Im G values carry
    /// independent errors with the given standard deviations.
    pub fn propagate(&self, sigma_im_g: [f64; 2]) -> (f64, f64) {
        let (a, b) = self.row(0);
        let (c, d) = self.row(1);
        let m = a * d - b * c;
        let e0 = self.sensitivity[0] * sigma_im_g[0];
        let e1 = self.sensitivity[1] * sigma_im_g[1];
        // inverse rows: (d, −b)/m and (−c, a)/m
        let re = ((d * e0).powi(2) + (b * e1).powi(2)).sqrt() / m.abs();
        let im = ((c * e0).powi(2) + (a * e1).powi(2)).sqrt() / m.abs();
        (re, im)
    }
}

/// s over (ℓ, ω), flattened with ω fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringTable {
    pub ell_max: usize,
    pub omegas: Vec<f64>,
    pub s: Vec<C>,
    /// 1/|det| of the two-height system, or 1 for directly matched values.
    pub condition: Vec<f64>,
    pub valid: Vec<bool>,
}

impl ScatteringTable {
    pub fn new(ell_max: usize, omegas: Vec<f64>) -> Self {
        let n = (ell_max + 1) * omegas.len();
        ScatteringTable { ell_max, omegas, s: vec![C::new(0.0, 0.0); n], condition: vec![1.0; n], valid: vec![true; n] }
    }

    pub fn index(&self, ell: usize, w: usize) -> usize {
        ell * self.omegas.len() + w
    }

    pub fn get(&self, ell: usize, w: usize) -> C {
        self.s[self.index(ell, w)]
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Coulomb tail seen by the observations: radii and α = 1/H.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailGeometry {
    pub r_sun: f64,
    pub alpha: f64,
}

impl TailGeometry {
    pub fn of(model: &SolarModel) -> Self {
        TailGeometry { r_sun: model.solar_radius(), alpha: model.atmosphere().alpha() }
    }
}

/// Builds the per-ℓ systems at one frequency with wavenumber k.
pub fn two_height_systems(
    diag: &GreensDiagonal,
    w: usize,
    k: f64,
    geom: TailGeometry,
) -> Result<Vec<TwoHeightSystem>> {
    if diag.heights.len() != 2 {
        return Err(Error::Config(format!("need exactly two heights, got {}", diag.heights.len())));
    }
    let eta = geom.alpha / (2.0 * k);
    let r = [geom.r_sun + diag.heights[0], geom.r_sun + diag.heights[1]];
    let h0 = coulomb_h_range(diag.ell_max, eta, k * r[0])?;
    let h1 = coulomb_h_range(diag.ell_max, eta, k * r[1])?;
    let mut out = Vec::with_capacity(diag.n_ell());
    for ell in 0..=diag.ell_max {
        let mut sys = TwoHeightSystem {
            ell,
            omega: diag.omegas[w],
            vartheta: [0.0; 2],
            rhs: [0.0; 2],
            det: 0.0,
            sensitivity: [0.0; 2],
        };
        for (i, pair) in [h0[ell], h1[ell]].iter().enumerate() {
            let m2 = pair.modulus_sq();
            sys.vartheta[i] = pair.vartheta();
            sys.rhs[i] = (m2 - 2.0 * k * diag.get(i, ell, w)) / m2;
            sys.sensitivity[i] = -2.0 * k / m2;
        }
        sys.det = (sys.vartheta[1] - sys.vartheta[0]).sin();
        out.push(sys);
    }
    Ok(out)
}

/// Solves every (ℓ, ω) cell; ill-conditioned cells are marked invalid.
pub fn extract_scattering(diag: &GreensDiagonal, model: &SolarModel) -> Result<ScatteringTable> {
    let ks = diag.omegas.iter().map(|&w| wavenumber(model, w)).collect::<Result<Vec<_>>>()?;
    extract_scattering_with(diag, &ks, TailGeometry::of(model), DET_MIN)
}

/// [`extract_scattering`] with explicit wavenumbers, tail and threshold.
pub fn extract_scattering_with(
    diag: &GreensDiagonal,
    ks: &[f64],
    geom: TailGeometry,
    det_min: f64,
) -> Result<ScatteringTable> {
    let mut t = ScatteringTable::new(diag.ell_max, diag.omegas.clone());
    for (w, &k) in ks.iter().enumerate() {
        for sys in two_height_systems(diag, w, k, geom)? {
            let i = t.index(sys.ell, w);
            t.condition[i] = 1.0 / sys.det.abs();
            match sys.solve(det_min) {
                Some(s) => t.s[i] = s,
                None => {
                    t.s[i] = C::new(f64::NAN, f64::NAN);
                    t.valid[i] = false;
                }
            }
        }
    }
    Ok(t)
}

/// Like [`extract_scattering`] but fails on the first singular cell.
pub fn extract_scattering_strict(diag: &GreensDiagonal, model: &SolarModel) -> Result<ScatteringTable> {
    let t = extract_scattering(diag, model)?;
    if let Some(i) = t.valid.iter().position(|v| !v) {
        let n = t.omegas.len();
        return Err(Error::SingularSystem(format!(
            "ell {} at omega {} rad/s: condition {:e} near the singular set",
            i / n,
            t.omegas[i % n],
            t.condition[i]
        )));
    }
    Ok(t)
}

/// One near-singular point of a height scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularPoint {
    pub r: f64,
    pub ell: usize,
    pub abs_sin: f64,
}

/// Scan resolution and threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    pub n_points: usize,
    pub threshold: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { n_points: 1001, threshold: SCAN_THRESHOLD }
    }
}

/// Near-singular heights for observations paired with R_o.
///
/// Samples r evenly on `range` (`opts.n_points` points) and reports the
/// points where |sin(ϑ_ℓ(kr) − ϑ_ℓ(kR_o))| has a local minimum in r below
/// the threshold for some ℓ ≤ ell_max, with the ℓ attaining the smallest
/// value.  The trivial zero at r = R_o and its monotone neighbourhood are
/// therefore not reported.
pub fn singular_set_scan(
    model: &SolarModel,
    omega: f64,
    r_o: f64,
    range: (f64, f64),
    ell_max: usize,
    opts: &ScanOptions,
) -> Result<Vec<SingularPoint>> {
    let k = wavenumber(model, omega)?;
    scan_phases(k, model.atmosphere().alpha(), r_o, range, ell_max, opts)
}

/// [`singular_set_scan`] for a bare Coulomb tail with wavenumber k and
/// coefficient α.
pub fn scan_phases(
    k: f64,
    alpha: f64,
    r_o: f64,
    range: (f64, f64),
    ell_max: usize,
    opts: &ScanOptions,
) -> Result<Vec<SingularPoint>> {
    let (lo, hi) = range;
    if !(hi >= lo) || opts.n_points == 0 {
        return Ok(Vec::new());
    }
    if lo < r_o {
        return Err(Error::Config(format!("scan range starts at {lo} m below R_o = {r_o} m")));
    }
    let eta = alpha / (2.0 * k);
    let base: Vec<f64> = coulomb_h_range(ell_max, eta, k * r_o)?.iter().map(|p| p.vartheta()).collect();
    let n = opts.n_points;
    let radii: Vec<f64> =
        (0..n).map(|j| if n == 1 { lo } else { lo + (hi - lo) * j as f64 / (n - 1) as f64 }).collect();
    // |sin| per grid point, ℓ fastest
    let mut table = Vec::with_capacity(n * (ell_max + 1));
    for &r in &radii {
        let pairs = coulomb_h_range(ell_max, eta, k * r)?;
        table.extend(pairs.iter().zip(&base).map(|(p, b)| (p.vartheta() - b).sin().abs()));
    }
    let at = |j: usize, l: usize| table[j * (ell_max + 1) + l];
    let mut hits = Vec::new();
    for (j, &r) in radii.iter().enumerate() {
        if r == r_o {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for l in 0..=ell_max {
            let v = at(j, l);
            let is_min = (j == 0 || v <= at(j - 1, l)) && (j + 1 == n || v <= at(j + 1, l));
            if v < opts.threshold && is_min && best.is_none_or(|b| v < b.1) {
                best = Some((l, v));
            }
        }
        if let Some((ell, abs_sin)) = best {
            hits.push(SingularPoint { r, ell, abs_sin });
        }
    }
    Ok(hits)
}

pub const SMAT_HEADER: &str = "# heliosolve-smat v1";
const SMAT_COLUMNS: [&str; 6] = ["ell", "omega_rad_s", "re_s", "im_s", "condition", "valid"];

pub fn write_scattering(t: &ScatteringTable) -> String {
    let mut w = TableWriter::new(SMAT_HEADER, &SMAT_COLUMNS);
    for ell in 0..=t.ell_max {
        for (k, &omega) in t.omegas.iter().enumerate() {
            let i = t.index(ell, k);
            w.row(&[
                Field::U(ell as u64),
                Field::F(omega),
                Field::F(t.s[i].re),
                Field::F(t.s[i].im),
                Field::F(t.condition[i]),
                Field::B(t.valid[i]),
            ]);
        }
    }
    w.finish()
}

pub fn parse_scattering(text: &str) -> Result<ScatteringTable> {
    let tab = table::read_table(text, SMAT_HEADER, &SMAT_COLUMNS)?;
    let mut omegas: Vec<f64> = Vec::new();
    let mut ell_max = 0;
    let mut rows = Vec::with_capacity(tab.rows.len());
    for (line, row) in &tab.rows {
        let line = *line;
        let ell = table::parse_usize(&row[0], line)?;
        let w = table::parse_f64(&row[1], line)?;
        let s = C::new(table::parse_f64(&row[2], line)?, table::parse_f64(&row[3], line)?);
        let cond = table::parse_f64(&row[4], line)?;
        let valid = table::parse_bool(&row[5], line)?;
        if !omegas.contains(&w) {
            omegas.push(w);
        }
        ell_max = ell_max.max(ell);
        rows.push((line, ell, w, s, cond, valid));
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 2, msg: "no data rows".into() });
    }
    let mut t = ScatteringTable::new(ell_max, omegas);
    if rows.len() != t.len() {
        return Err(Error::Parse {
            line: rows.last().map_or(2, |r| r.0),
            msg: format!("expected {} rows for a full (ell, omega) grid, found {}", t.len(), rows.len()),
        });
    }
    let mut seen = vec![false; t.len()];
    for (line, ell, w, s, cond, valid) in rows {
        let wi = t.omegas.iter().position(|&x| x == w).unwrap();
        let i = t.index(ell, wi);
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Parse { line, msg: "duplicate cell".into() });
        }
        t.s[i] = s;
        t.condition[i] = cond;
        t.valid[i] = valid;
    }
    Ok(t)
}

pub fn save_scattering(t: &ScatteringTable, path: &Path) -> Result<()> {
    std::fs::write(path, write_scattering(t))?;
    Ok(())
}

pub fn load_scattering(path: &Path) -> Result<ScatteringTable> {
    parse_scattering(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests;
