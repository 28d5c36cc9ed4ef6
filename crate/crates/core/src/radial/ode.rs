//! Adaptive Dormand–Prince 5(4) integration of φ'' = Qφ in internal units.
//!
//! Two state representations are used.  Where the wanted solution grows
//! (Re Q > 0 and φ'/φ pointing along the direction of travel) it is carried
//! as S = ln φ and y = φ'/φ, which never overflow.  The centrifugal part of
//! y is taken out analytically: with c = ℓ+1 outward and c = −ℓ inward,
//! S = c·ln x + T and y = c/x + z give
//!
//!   T' = z,  z' = W − 2cz/x − z²,  W = v̂ − κ²,
//!
//! so near the origin only the small remainder z is integrated.  Elsewhere
//! (φ, φ') are integrated directly and renormalized by powers of two.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::solar_model::PotentialProfile;

type C = Complex64;
type V2 = [C; 2];

const LN2: f64 = std::f64::consts::LN_2;

/// Coefficient Q(x) = ℓ(ℓ+1)/x² + v̂(x) − κ².
pub(crate) struct Coefficient<'a> {
    pot: &'a PotentialProfile,
    ell: f64,
    l2: f64,
    kappa2: f64,
}

impl<'a> Coefficient<'a> {
    pub fn new(pot: &'a PotentialProfile, ell: usize) -> Self {
        let l = ell as f64;
        let kappa = pot.kappa();
        Coefficient { pot, ell: l, l2: l * (l + 1.0), kappa2: kappa * kappa }
    }

    /// W = v̂ − κ².
    #[inline]
    pub fn w(&self, x: f64) -> C {
        self.pot.v_hat(x) - self.kappa2
    }

    #[inline]
    pub fn q(&self, x: f64) -> C {
        self.w(x) + self.l2 / (x * x)
    }
}

/// State at one point, in whichever representation was active.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum State {
    /// φ = p·e^{ls}, φ' = dp·e^{ls}.
    Linear { p: C, dp: C, ls: f64 },
    /// φ = e^{s}, φ' = y·e^{s}.
    Riccati { s: C, y: C },
}

impl State {
    /// (φ, φ', log scale) with max(|φ|, |φ'|/κ) = 1 for Riccati states.
    pub fn linear(&self, kappa: f64) -> (C, C, f64) {
        match *self {
            State::Linear { p, dp, ls } => (p, dp, ls),
            State::Riccati { s, y } => {
                let n = (y.norm() / kappa).max(1.0);
                let p = C::from_polar(1.0 / n, s.im);
                (p, y * p, s.re + n.ln())
            }
        }
    }
}

/// One accepted step, enough for quintic Hermite dense output.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Segment {
    pub x0: f64,
    pub x1: f64,
    /// Centrifugal exponent c in Riccati form, `None` for linear steps.
    riccati: Option<f64>,
    /// Linear: (φ, φ') at both ends in the common scale `ls`, `q` = Q.
    /// Riccati: (T, z) at both ends, `q` = W.
    f0: C,
    d0: C,
    f1: C,
    d1: C,
    q0: C,
    q1: C,
    ls: f64,
}

/// Quintic Hermite interpolant and its derivative at t ∈ [0, 1].
#[allow(clippy::too_many_arguments)]
fn hermite5(t: f64, h: f64, f0: C, d0: C, dd0: C, f1: C, d1: C, dd1: C) -> (C, C) {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
    let g0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let g1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let g2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
    let g3 = -g0;
    let g4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let g5 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
    let hh = h * h;
    let f = f0 * h0 + d0 * (h * h1) + dd0 * (hh * h2) + f1 * h3 + d1 * (h * h4) + dd1 * (hh * h5);
    let d = (f0 * g0 + f1 * g3) / h + d0 * g1 + d1 * g4 + (dd0 * g2 + dd1 * g5) * h;
    (f, d)
}

impl Segment {
    pub fn contains(&self, x: f64) -> bool {
        let (a, b) = if self.x0 <= self.x1 { (self.x0, self.x1) } else { (self.x1, self.x0) };
        x >= a && x <= b
    }

    /// (φ, φ') = (a, b)·e^{ls} at x.
    pub fn eval(&self, x: f64) -> (C, C, f64) {
        let h = self.x1 - self.x0;
        let t = ((x - self.x0) / h).clamp(0.0, 1.0);
        if let Some(c) = self.riccati {
            let dd0 = self.q0 - self.d0 * (2.0 * c / self.x0) - self.d0 * self.d0;
            let dd1 = self.q1 - self.d1 * (2.0 * c / self.x1) - self.d1 * self.d1;
            let (t, z) = hermite5(t, h, self.f0, self.d0, dd0, self.f1, self.d1, dd1);
            let s = t + c * x.ln();
            let p = C::from_polar(1.0, s.im);
            (p, (z + c / x) * p, s.re)
        } else {
            let (p, dp) = hermite5(
                t,
                h,
                self.f0,
                self.d0,
                self.q0 * self.f0,
                self.f1,
                self.d1,
                self.q1 * self.f1,
            );
            (p, dp, self.ls)
        }
    }

    /// ∫_a^b f(x)·φ(x)²·e^{−2·reference} dx by Gauss–Legendre, for [a, b]
    /// inside the segment.
    pub fn quad_phi2(&self, a: f64, b: f64, gl: &(Vec<f64>, Vec<f64>), reference: f64, f: &mut impl FnMut(f64) -> C) -> C {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = C::new(0.0, 0.0);
        for (t, w) in gl.0.iter().zip(&gl.1) {
            let x = mid + half * t;
            let (p, _, ls) = self.eval(x);
            acc += f(x) * p * p * ((2.0 * (ls - reference)).exp() * *w);
        }
        acc * half
    }

    /// Same with |φ|² in place of φ² and a real weight.
    pub fn quad_abs2(&self, a: f64, b: f64, gl: &(Vec<f64>, Vec<f64>), reference: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (t, w) in gl.0.iter().zip(&gl.1) {
            let x = mid + half * t;
            let (p, _, ls) = self.eval(x);
            acc += f(x) * p.norm_sqr() * (2.0 * (ls - reference)).exp() * *w;
        }
        acc * half
    }


    pub fn lo(&self) -> f64 {
        self.x0.min(self.x1)
    }

    pub fn hi(&self) -> f64 {
        self.x0.max(self.x1)
    }
}

/// Controls for one integration run.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Control {
    pub rtol: f64,
    pub fixed_step: Option<f64>,
    pub max_steps: usize,
}

/// Output of [`integrate`]: dense segments in the order they were taken and
/// the state at every target.
pub(crate) struct Track {
    pub segments: Vec<Segment>,
    pub nodes: Vec<(f64, State)>,
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn comb(y: &V2, h: f64, terms: &[(f64, &V2)]) -> V2 {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += k[0] * (h * c);
        out[1] += k[1] * (h * c);
    }
    out
}

/// Running representation inside [`integrate`].
#[derive(Clone, Copy, Debug)]
enum Run {
    Linear { p: C, dp: C, ls: f64 },
    /// S = c·ln x + t, y = c/x + z.
    Riccati { t: C, z: C, c: f64 },
}

impl Run {
    fn from_state(s: State, x: f64, c: f64) -> Self {
        match s {
            State::Linear { p, dp, ls } => Run::Linear { p, dp, ls },
            State::Riccati { s, y } => Run::Riccati { t: s - c * x.ln(), z: y - c / x, c },
        }
    }

    fn to_state(self, x: f64) -> State {
        match self {
            Run::Linear { p, dp, ls } => State::Linear { p, dp, ls },
            Run::Riccati { t, z, c } => State::Riccati { s: t + c * x.ln(), y: z + c / x },
        }
    }
}

struct Step {
    y: V2,
    err: V2,
    w1: C,
}

/// One Dormand–Prince step; `w0` = W(x).
fn dp5(coef: &Coefficient, riccati: Option<f64>, x: f64, y: &V2, w0: C, h: f64) -> Step {
    let f = |x: f64, w: C, y: &V2| -> V2 {
        match riccati {
            Some(c) => [y[1], w - y[1] * (2.0 * c / x) - y[1] * y[1]],
            None => [y[1], (w + coef.l2 / (x * x)) * y[0]],
        }
    };
    let k1 = f(x, w0, y);
    let y2 = comb(y, h, &[(A21, &k1)]);
    let x2 = x + h / 5.0;
    let k2 = f(x2, coef.w(x2), &y2);
    let y3 = comb(y, h, &[(A31, &k1), (A32, &k2)]);
    let x3 = x + 0.3 * h;
    let k3 = f(x3, coef.w(x3), &y3);
    let y4 = comb(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
    let x4 = x + 0.8 * h;
    let k4 = f(x4, coef.w(x4), &y4);
    let y5 = comb(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
    let x5 = x + h * (8.0 / 9.0);
    let k5 = f(x5, coef.w(x5), &y5);
    let y6 = comb(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
    let x6 = x + h;
    let w1 = coef.w(x6);
    let k6 = f(x6, w1, &y6);
    let yn = comb(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(x6, w1, &yn);
    let z = [C::new(0.0, 0.0); 2];
    let err = comb(&z, h, &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
    Step { y: yn, err, w1 }
}

/// Threshold on Re Q above which the growing solution may be carried in
/// Riccati form; keeps the switch away from turning points.
fn riccati_threshold(kappa2: f64) -> f64 {
    1e-2 * (kappa2 + 1.0)
}

/// Preferred representation at x moving in direction `dir`.
fn choose(run: Run, x: f64, q: C, kappa: f64, dir: f64, c: f64) -> Run {
    let thr = riccati_threshold(kappa * kappa);
    match run {
        Run::Linear { p, dp, ls } => {
            if q.re > thr && p.norm() > 0.0 {
                let y = dp / p;
                if dir * y.re > 0.5 * q.re.sqrt() {
                    let s = p.ln() + ls;
                    return Run::Riccati { t: s - c * x.ln(), z: y - c / x, c };
                }
            }
            run
        }
        Run::Riccati { .. } => {
            if q.re <= 0.0 {
                if let State::Riccati { s, y } = run.to_state(x) {
                    let p = C::from_polar(1.0, s.im);
                    return renormalize(Run::Linear { p, dp: y * p, ls: s.re }, kappa);
                }
            }
            run
        }
    }
}

/// Keeps max(|φ|, |φ'|/κ) in [1e-2, 1e2] by powers of two.
fn renormalize(run: Run, kappa: f64) -> Run {
    match run {
        Run::Linear { p, dp, ls } => {
            let n = p.norm().max(dp.norm() / kappa);
            if n > 0.0 && n.is_finite() && !(1e-2..=1e2).contains(&n) {
                let m = -n.log2().round();
                let f = m.exp2();
                Run::Linear { p: p * f, dp: dp * f, ls: ls - m * LN2 }
            } else {
                run
            }
        }
        r => r,
    }
}

/// Integrates from `start` at `x_start` through `targets`, which must be
/// ordered along the direction of travel and lie beyond `x_start`.
pub(crate) fn integrate(
    coef: &Coefficient,
    x_start: f64,
    start: State,
    targets: &[f64],
    ctl: &Control,
) -> Result<Track> {
    let kappa = coef.kappa2.sqrt().max(1e-300);
    let mut track = Track { segments: Vec::new(), nodes: Vec::with_capacity(targets.len()) };
    let Some(&last) = targets.last() else { return Ok(track) };
    let dir = if last >= x_start { 1.0 } else { -1.0 };
    let c = if dir > 0.0 { coef.ell + 1.0 } else { -coef.ell };
    let mut x = x_start;
    let mut run = Run::from_state(start, x, c);
    let mut w = coef.w(x);
    let mut h = match ctl.fixed_step {
        Some(h) => h.abs(),
        None => {
            let scale = coef.q(x).norm().sqrt().max(1e-300);
            let mut h = 0.01 / scale;
            if dir > 0.0 {
                h = h.min(0.1 * x.abs().max(1e-300));
            }
            h
        }
    };
    let mut steps = 0usize;
    for &t in targets {
        while (t - x) * dir > 0.0 {
            let q = w + coef.l2 / (x * x);
            run = choose(run, x, q, kappa, dir, c);
            let remaining = (t - x).abs();
            let land = h >= remaining * (1.0 - 1e-12);
            let hs = if land { remaining } else { h } * dir;
            let (riccati, y0) = match run {
                Run::Linear { p, dp, .. } => (None, [p, dp]),
                Run::Riccati { t, z, c } => (Some(c), [t, z]),
            };
            let st = dp5(coef, riccati, x, &y0, w, hs);
            let err = if ctl.fixed_step.is_some() {
                0.0
            } else if let Some(c) = riccati {
                let x1 = x + hs;
                let ys = (y0[1] + c / x).norm().max((st.y[1] + c / x1).norm()).max(q.norm().sqrt());
                st.err[0].norm().max(st.err[1].norm() / ys) / ctl.rtol
            } else {
                let ks = q.norm().sqrt().max(kappa);
                let sc = y0[0].norm().max(y0[1].norm() / ks).max(st.y[0].norm()).max(st.y[1].norm() / ks);
                st.err[0].norm().max(st.err[1].norm() / ks) / (ctl.rtol * sc)
            };
            steps += 1;
            if steps > ctl.max_steps {
                return Err(Error::ToleranceNotMet(format!(
                    "more than {} steps, stopped at x = {x}",
                    ctl.max_steps
                )));
            }
            if !err.is_finite() || err > 1.0 {
                h = hs.abs() * if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.2 };
                if h < 1e-14 * x.abs().max(1e-300) {
                    return Err(Error::StepUnderflow { r: x });
                }
                continue;
            }
            let x1 = if land { t } else { x + hs };
            let (ls, q0, q1) = match run {
                Run::Linear { ls, .. } => (ls, q, st.w1 + coef.l2 / (x1 * x1)),
                Run::Riccati { .. } => (0.0, w, st.w1),
            };
            track.segments.push(Segment {
                x0: x,
                x1,
                riccati,
                f0: y0[0],
                d0: y0[1],
                f1: st.y[0],
                d1: st.y[1],
                q0,
                q1,
                ls,
            });
            x = x1;
            w = st.w1;
            run = match run {
                Run::Linear { ls, .. } => renormalize(Run::Linear { p: st.y[0], dp: st.y[1], ls }, kappa),
                Run::Riccati { c, .. } => Run::Riccati { t: st.y[0], z: st.y[1], c },
            };
            if ctl.fixed_step.is_none() {
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // a landing step is usually short; do not let it shrink h
                h = if land { h.max(hs.abs() * grow) } else { hs.abs() * grow };
            }
        }
        track.nodes.push((t, run.to_state(x)));
    }
    Ok(track)
}
