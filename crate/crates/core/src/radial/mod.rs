//! Regular solution, scattering matrix element and radial Green's function
//! of φ'' = (ℓ(ℓ+1)/x² + v̂ − κ²)φ.
//!
//! Everything is computed in internal units x = r/L (see
//! [`crate::solar_model::Units`]); SI enters only through the public
//! radii and through [`RadialGreens::eval`], which returns G in metres.

mod ode;

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::solar_model::PotentialProfile;
use crate::specfun::coulomb_h;
use ode::{Coefficient, Control, Segment, State};

type C = Complex64;

/// Solver settings shared by every radial integration.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialOptions {
    /// Relative tolerance of the embedded error estimate.
    pub rtol: f64,
    /// Take fixed steps of this size (internal units) without error control.
    pub fixed_step: Option<f64>,
    pub max_steps: usize,
    /// Additional radii (m) at which the solution is recorded.
    pub nodes: Vec<f64>,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions { rtol: 1e-10, fixed_step: None, max_steps: 5_000_000, nodes: Vec::new() }
    }
}

impl RadialOptions {
    fn control(&self) -> Control {
        Control { rtol: self.rtol, fixed_step: self.fixed_step, max_steps: self.max_steps }
    }
}

/// Ratio below which matching is refused.
pub const DEGENERACY_LIMIT: f64 = 1e-12;
/// Ratio below which [`MatchingResult::cond_flag`] is raised.
pub const CONDITION_WARNING: f64 = 1e-8;

const QUAD_POINTS: usize = 8;

fn gl() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| crate::specfun::gauss_legendre(QUAD_POINTS))
}

/// Regular solution φ ~ x^{ℓ+1} at the recorded nodes, plus dense output.
///
/// The true solution is `phi[i]·exp(log_scale[i])`.
#[derive(Clone, Debug)]
pub struct RadialSolution {
    pub ell: usize,
    pub grid: Vec<f64>,
    pub phi: Vec<C>,
    pub dphi: Vec<C>,
    pub log_scale: Vec<f64>,
    /// Series coefficient a in φ ≈ x^{ℓ+1}(1 + a x²) below the first node.
    series_a: C,
    states: Vec<State>,
    segments: Vec<Segment>,
}

/// Finds the segment holding x in a list ordered along the direction of
/// travel.
fn find_segment(segs: &[Segment], x: f64) -> Option<&Segment> {
    let first = segs.first()?;
    let ascending = first.x1 >= first.x0;
    let i = if ascending {
        segs.partition_point(|s| s.x1 < x)
    } else {
        segs.partition_point(|s| s.x1 > x)
    };
    segs.get(i).filter(|s| s.contains(x))
}

/// Σ over segments of ∫ f φ² on their overlap with [a, b].
fn quad_phi2_over(segs: &[Segment], a: f64, b: f64, reference: f64, mut f: impl FnMut(f64) -> C) -> C {
    let mut acc = C::new(0.0, 0.0);
    for s in segs {
        let (lo, hi) = (s.lo().max(a), s.hi().min(b));
        if hi > lo {
            acc += s.quad_phi2(lo, hi, gl(), reference, &mut f);
        }
    }
    acc
}

fn quad_abs2_over(segs: &[Segment], a: f64, b: f64, reference: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for s in segs {
        let (lo, hi) = (s.lo().max(a), s.hi().min(b));
        if hi > lo {
            acc += s.quad_abs2(lo, hi, gl(), reference, &mut f);
        }
    }
    acc
}

impl RadialSolution {
    /// First node, where the series start was applied.
    pub fn x_start(&self) -> f64 {
        self.grid[0]
    }

    pub fn x_end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// (φ, φ', log scale) at any x in (0, x_end].
    pub fn eval(&self, x: f64) -> Option<(C, C, f64)> {
        if x > 0.0 && x < self.grid[0] {
            let l1 = (self.ell + 1) as f64;
            let p = C::new(1.0, 0.0) + self.series_a * (x * x);
            let dp = (C::new(l1, 0.0) + self.series_a * ((l1 + 2.0) * x * x)) / x;
            return Some((p, dp, l1 * x.ln()));
        }
        if x == self.grid[0] {
            return Some((self.phi[0], self.dphi[0], self.log_scale[0]));
        }
        find_segment(&self.segments, x).map(|s| s.eval(x))
    }

    /// Index of the recorded node at exactly x.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        self.grid.iter().position(|&g| g == x)
    }

    /// ∫_a^b f(x)·φ(x)² dx · e^{−2·reference}.
    pub(crate) fn integral_phi2(&self, a: f64, b: f64, reference: f64, f: impl FnMut(f64) -> C) -> C {
        quad_phi2_over(&self.segments, a, b, reference, f)
    }

    /// ∫_a^b f(x)·|φ(x)|² dx · e^{−2·reference}.
    pub(crate) fn integral_abs2(&self, a: f64, b: f64, reference: f64, f: impl FnMut(f64) -> f64) -> f64 {
        quad_abs2_over(&self.segments, a, b, reference, f)
    }
}

/// Start radius and data from the two-term series about the origin.
fn series_start(pot: &PotentialProfile, ell: usize) -> (f64, C, State) {
    let l = ell as f64;
    let kappa2 = pot.kappa().powi(2);
    let denom = (2.0 * l + 2.0) * (2.0 * l + 3.0);
    let cap = 1e-3 * pot.r_a_hat();
    let mut x0 = cap;
    // two passes: v̂ is nearly constant near the origin
    for _ in 0..2 {
        let v = pot.v_hat(x0.min(cap)).norm();
        x0 = (1e-12 * denom / (v + kappa2).max(1e-300)).sqrt().min(cap);
    }
    let a = (pot.v_hat(x0) - kappa2) / (2.0 * (2.0 * l + 3.0));
    let p = C::new(1.0, 0.0) + a * (x0 * x0);
    let dp = (C::new(l + 1.0, 0.0) + a * ((l + 3.0) * x0 * x0)) / x0;
    let ls = (l + 1.0) * x0.ln();
    (x0, a, State::Linear { p, dp, ls })
}

fn to_internal_sorted(pot: &PotentialProfile, radii: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = radii.iter().map(|r| r / pot.length_unit).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

/// Integrates the regular solution from the series start to `r_end` (m).
pub fn integrate_regular(pot: &PotentialProfile, ell: usize, r_end: f64) -> Result<RadialSolution> {
    integrate_regular_with(pot, ell, r_end, &RadialOptions::default())
}

pub fn integrate_regular_with(
    pot: &PotentialProfile,
    ell: usize,
    r_end: f64,
    opts: &RadialOptions,
) -> Result<RadialSolution> {
    let x_end = r_end / pot.length_unit;
    if !(x_end >= pot.r_a_hat() * (1.0 - 1e-15)) {
        return Err(Error::Config(format!("r_end = {r_end} m lies below R_a = {} m", pot.r_a)));
    }
    let (x0, a, start) = series_start(pot, ell);
    let mut targets = pot.breakpoints();
    targets.extend(to_internal_sorted(pot, &opts.nodes));
    targets.push(x_end);
    targets.retain(|&t| t > x0 && t <= x_end);
    targets.sort_by(|a, b| a.total_cmp(b));
    targets.dedup();
    continue_regular(pot, ell, x0, start, a, &targets, opts)
}

/// Carries the regular solution from a stored state at `x_from` through
/// `targets` (ascending, internal units).
pub(crate) fn continue_regular(
    pot: &PotentialProfile,
    ell: usize,
    x_from: f64,
    start: State,
    series_a: C,
    targets: &[f64],
    opts: &RadialOptions,
) -> Result<RadialSolution> {
    let coef = Coefficient::new(pot, ell);
    let kappa = pot.kappa();
    let track = ode::integrate(&coef, x_from, start, targets, &opts.control())?;
    let n = track.nodes.len() + 1;
    let mut sol = RadialSolution {
        ell,
        grid: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        dphi: Vec::with_capacity(n),
        log_scale: Vec::with_capacity(n),
        series_a,
        states: Vec::with_capacity(n),
        segments: track.segments,
    };
    for (x, st) in std::iter::once((x_from, start)).chain(track.nodes) {
        let (p, dp, ls) = st.linear(kappa);
        sol.grid.push(x);
        sol.phi.push(p);
        sol.dphi.push(dp);
        sol.log_scale.push(ls);
        sol.states.push(st);
    }
    Ok(sol)
}

/// Regular solution state at one radius.  Potentials that differ only
/// above that radius can restart from it with [`resume_regular`].
#[derive(Clone, Copy, Debug)]
pub struct RegularCheckpoint {
    pub ell: usize,
    /// Internal radius of the stored state.
    pub x: f64,
    state: State,
    series_a: C,
}

/// Integrates the regular solution of `pot` up to `r_stop` (m) and keeps
/// the final state.
pub fn regular_checkpoint(
    pot: &PotentialProfile,
    ell: usize,
    r_stop: f64,
    opts: &RadialOptions,
) -> Result<RegularCheckpoint> {
    let x_stop = r_stop / pot.length_unit;
    let (x0, a, start) = series_start(pot, ell);
    if !(x_stop > x0) {
        return Ok(RegularCheckpoint { ell, x: x0, state: start, series_a: a });
    }
    let mut targets = pot.breakpoints();
    targets.push(x_stop);
    targets.retain(|&t| t > x0 && t <= x_stop);
    targets.sort_by(|a, b| a.total_cmp(b));
    targets.dedup();
    let sol = continue_regular(pot, ell, x0, start, a, &targets, opts)?;
    let i = sol.grid.len() - 1;
    Ok(RegularCheckpoint { ell, x: sol.grid[i], state: sol.states[i], series_a: a })
}

/// Continues from a checkpoint to `r_end` ≥ R_a.  The returned solution
/// covers [checkpoint, r_end] only.
pub fn resume_regular(
    pot: &PotentialProfile,
    cp: &RegularCheckpoint,
    r_end: f64,
    opts: &RadialOptions,
) -> Result<RadialSolution> {
    let x_end = r_end / pot.length_unit;
    if !(x_end >= pot.r_a_hat() * (1.0 - 1e-15)) {
        return Err(Error::Config(format!("r_end = {r_end} m lies below R_a = {} m", pot.r_a)));
    }
    let mut targets = pot.breakpoints();
    targets.extend(to_internal_sorted(pot, &opts.nodes));
    targets.push(x_end);
    targets.retain(|&t| t > cp.x && t <= x_end);
    targets.sort_by(|a, b| a.total_cmp(b));
    targets.dedup();
    continue_regular(pot, cp.ell, cp.x, cp.state, cp.series_a, &targets, opts)
}

/// Scattering matrix element and expansion coefficient of the regular
/// solution, φ = b(H⁻ − sH⁺) for x ≥ R̂_a.
///
/// b is in internal units and stored as `b·exp(b_log_scale)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchingResult {
    pub s: C,
    pub b: C,
    pub b_log_scale: f64,
    pub cond_flag: bool,
    /// |[φ,H⁺]| relative to the scale of φ·H⁺.
    pub ratio: f64,
}

/// Coulomb data at x in internal units: (H⁺, dH⁺/dx)·e^{−sc} and sc.
fn h_plus_at(pot: &PotentialProfile, ell: usize, x: f64) -> Result<(C, C, f64)> {
    let kappa = pot.kappa();
    let pair = coulomb_h(ell, pot.eta(), kappa * x)?;
    let (h, dh, sc) = pair.h_plus_uniform();
    Ok((h, dh * kappa, sc))
}

/// Matches the regular solution to Coulomb waves at R̂_a.
pub fn match_scattering(sol: &RadialSolution, pot: &PotentialProfile) -> Result<MatchingResult> {
    let xa = pot.r_a_hat();
    let i = sol.node_index(xa).ok_or_else(|| {
        Error::Config("regular solution has no node at R_a; integrate at least to R_a".into())
    })?;
    let (p, dp, ls) = (sol.phi[i], sol.dphi[i], sol.log_scale[i]);
    let kappa = pot.kappa();
    let (hp, dhp, sc) = h_plus_at(pot, sol.ell, xa)?;
    let (hm, dhm) = (hp.conj(), dhp.conj());
    let wp = p * dhp - dp * hp;
    let wm = p * dhm - dp * hm;
    let ratio = wp.norm() / (p.norm().max(dp.norm() / kappa) * hp.norm().max(dhp.norm() / kappa) * kappa);
    if !(ratio >= DEGENERACY_LIMIT) {
        return Err(Error::DegenerateMatching { ell: sol.ell, ratio });
    }
    Ok(MatchingResult {
        s: wm / wp,
        b: wp / C::new(0.0, 2.0 * kappa),
        b_log_scale: ls + sc,
        cond_flag: ratio < CONDITION_WARNING,
        ratio,
    })
}

/// Options for [`radial_greens_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct GreensOptions {
    pub radial: RadialOptions,
    /// Extent of the integrated regular solution (m); at least R_a.
    pub r_end: Option<f64>,
    /// Innermost radius (m) at which the outgoing solution is needed;
    /// defaults to the series start.
    pub r_inner: Option<f64>,
}

impl Default for GreensOptions {
    fn default() -> Self {
        GreensOptions { radial: RadialOptions::default(), r_end: None, r_inner: None }
    }
}

/// G(r, r') = −φ(r_<)φ⁺(r_>)/[φ, φ⁺] for one ℓ.
#[derive(Clone, Debug)]
pub struct RadialGreens {
    pub ell: usize,
    pub k: f64,
    regular: RadialSolution,
    matching: MatchingResult,
    /// Outgoing solution below R̂_a, integrated inward.
    outgoing: Vec<Segment>,
    x_inner: f64,
    /// [φ, φ⁺] = w·e^{w_ls}.
    w: C,
    w_ls: f64,
    kappa: f64,
    eta: f64,
    x_a: f64,
    length: f64,
}

pub fn radial_greens(pot: &PotentialProfile, ell: usize) -> Result<RadialGreens> {
    radial_greens_with(pot, ell, &GreensOptions::default())
}

pub fn radial_greens_with(pot: &PotentialProfile, ell: usize, opts: &GreensOptions) -> Result<RadialGreens> {
    let r_end = opts.r_end.unwrap_or(pot.r_a).max(pot.r_a);
    let regular = integrate_regular_with(pot, ell, r_end, &opts.radial)?;
    greens_from_regular(pot, regular, opts)
}

/// Builds the Green's function around an existing regular solution.
pub fn greens_from_regular(pot: &PotentialProfile, regular: RadialSolution, opts: &GreensOptions) -> Result<RadialGreens> {
    let ell = regular.ell;
    let matching = match_scattering(&regular, pot)?;
    let xa = pot.r_a_hat();
    let kappa = pot.kappa();
    let x_inner = match opts.r_inner {
        Some(r) => (r / pot.length_unit).max(regular.x_start()).min(xa),
        None => regular.x_start(),
    };
    let (hp, dhp, sc) = h_plus_at(pot, ell, xa)?;
    let outgoing = if x_inner < xa {
        let mut targets: Vec<f64> = pot.breakpoints();
        targets.extend(to_internal_sorted(pot, &opts.radial.nodes));
        targets.push(x_inner);
        targets.retain(|&t| t < xa && t >= x_inner);
        targets.sort_by(|a, b| b.total_cmp(a));
        targets.dedup();
        let coef = Coefficient::new(pot, ell);
        let start = State::Linear { p: hp, dp: dhp, ls: sc };
        ode::integrate(&coef, xa, start, &targets, &opts.radial.control())?.segments
    } else {
        Vec::new()
    };
    let i = regular.node_index(xa).expect("matched solution has a node at R_a");
    let (p, dp, ls) = (regular.phi[i], regular.dphi[i], regular.log_scale[i]);
    Ok(RadialGreens {
        ell,
        k: pot.k,
        w: p * dhp - dp * hp,
        w_ls: ls + sc,
        regular,
        matching,
        outgoing,
        x_inner,
        kappa,
        eta: pot.eta(),
        x_a: xa,
        length: pot.length_unit,
    })
}

impl RadialGreens {
    pub fn matching(&self) -> &MatchingResult {
        &self.matching
    }

    pub fn regular(&self) -> &RadialSolution {
        &self.regular
    }

    /// φ(x) as (mantissa, log scale).
    fn phi(&self, x: f64) -> Result<(C, f64)> {
        if x <= self.regular.x_end() {
            if let Some((p, _, ls)) = self.regular.eval(x) {
                return Ok((p, ls));
            }
        }
        let pair = coulomb_h(self.ell, self.eta, self.kappa * x)?;
        let (hp, _, sc) = pair.h_plus_uniform();
        let m = &self.matching;
        Ok((m.b * (hp.conj() - m.s * hp), m.b_log_scale + sc))
    }

    /// φ⁺(x) as (mantissa, log scale).
    fn phi_plus(&self, x: f64) -> Result<(C, f64)> {
        if x >= self.x_a {
            let pair = coulomb_h(self.ell, self.eta, self.kappa * x)?;
            let (hp, _, sc) = pair.h_plus_uniform();
            return Ok((hp, sc));
        }
        match find_segment(&self.outgoing, x) {
            Some(s) if x >= self.x_inner => {
                let (p, _, ls) = s.eval(x);
                Ok((p, ls))
            }
            _ => Err(Error::Config(format!(
                "outgoing solution not available at r = {} m (inner limit {} m)",
                x * self.length,
                self.x_inner * self.length
            ))),
        }
    }

    /// G in internal units at (x1, x2).
    pub fn eval_hat(&self, x1: f64, x2: f64) -> Result<C> {
        let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        let (a, la) = self.phi(lo)?;
        let (b, lb) = self.phi_plus(hi)?;
        Ok(-(a * b / self.w) * (la + lb - self.w_ls).exp())
    }

    /// G(r1, r2) in metres for radii in metres.
    pub fn eval(&self, r1: f64, r2: f64) -> Result<C> {
        Ok(self.eval_hat(r1 / self.length, r2 / self.length)? * self.length)
    }

    pub fn diagonal(&self, r: f64) -> Result<C> {
        self.eval(r, r)
    }

    /// ∫₀^{x_a} Im v̂(x')·|Ĝ(x', x)|² dx'.
    fn absorption_hat(&self, pot: &PotentialProfile, x: f64) -> Result<f64> {
        let imv = |y: f64| pot.v_hat(y).im;
        let (phx, lphx) = self.phi(x)?;
        let top = x.min(self.x_a);
        let mut total = 0.0;
        if top > 0.0 {
            // φ below x, paired with φ⁺(x)
            let (pp, lpp) = self.phi_plus(x)?;
            let i = self.regular.integral_abs2(0.0, top, lphx, imv);
            total += i * (pp / self.w).norm_sqr() * (2.0 * (lphx + lpp - self.w_ls)).exp();
        }
        if x < self.x_a {
            // φ⁺ above x up to R_a, paired with φ(x)
            let (_, lpx) = self.phi_plus(x)?;
            let j = quad_abs2_over(&self.outgoing, x, self.x_a, lpx, imv);
            total += j * (phx / self.w).norm_sqr() * (2.0 * (lphx + lpx - self.w_ls)).exp();
        }
        Ok(total)
    }
}

/// |Im G(r,r) − k|G(R,r)|² + ∫₀^R Im v(r')|G(r',r)|² dr'| in metres.
pub fn power_balance_residual(g: &RadialGreens, pot: &PotentialProfile, r: f64, big_r: f64) -> Result<f64> {
    if !(big_r > r && big_r >= pot.r_a) {
        return Err(Error::Config(format!("need R > r and R ≥ R_a, got r = {r}, R = {big_r}")));
    }
    let (x, xr) = (r / g.length, big_r / g.length);
    let diag = g.eval_hat(x, x)?.im;
    let far = g.eval_hat(xr, x)?.norm_sqr() * g.kappa;
    let vol = g.absorption_hat(pot, x)?;
    Ok((diag - far + vol).abs() * g.length)
}

#[cfg(test)]
mod tests;
