use nalgebra::{DMatrix, DVector};

use super::{ForwardModel, Param, ParamMap};
use crate::error::{Error, Result};
use crate::observe::GreensDiagonal;
use crate::recover::{two_height_systems, ScatteringTable, TailGeometry};
use crate::solar_model::{wavenumber, InversionUnknowns, SolarModel};

/// How residuals of the individual cells are weighted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightMode {
    Uniform,
    /// min(1, 1/condition).
    InverseCondition,
}

/// Settings of the iteratively regularised Gauss–Newton method.
#[derive(Clone, Debug, PartialEq)]
pub struct IrgnmConfig {
    /// Initial regularisation; `None` uses ‖J*WJ‖/‖L*L‖ at the background.
    pub alpha0: Option<f64>,
    pub q_factor: f64,
    pub max_outer: usize,
    pub tau_discrepancy: f64,
    /// Use one-sided differences with this relative step instead of the
    /// analytic derivative.
    pub fd_step: Option<f64>,
    pub weight_mode: WeightMode,
    pub free: Vec<Param>,
    /// Weight of the squared first derivative in the penalty, as a length
    /// in units of the interval width.
    pub smoothing_length: f64,
    /// Exact data: stop once the residual falls below this fraction of
    /// the weighted data norm.
    pub rel_residual_floor: f64,
}

impl Default for IrgnmConfig {
    fn default() -> Self {
        IrgnmConfig {
            alpha0: None,
            q_factor: 2.0 / 3.0,
            max_outer: 20,
            tau_discrepancy: 1.5,
            fd_step: None,
            weight_mode: WeightMode::InverseCondition,
            free: Param::ALL.to_vec(),
            smoothing_length: 0.25,
            rel_residual_floor: 1e-10,
        }
    }
}

impl IrgnmConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha0 {
            if !(a > 0.0) {
                return Err(Error::Config("alpha0 must be positive".into()));
            }
        }
        if !(self.q_factor > 0.0 && self.q_factor < 1.0) {
            return Err(Error::Config("q must lie in (0, 1)".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::Config("max_outer must be at least 1".into()));
        }
        if !(self.tau_discrepancy > 1.0) {
            return Err(Error::Config("tau must exceed 1".into()));
        }
        if let Some(h) = self.fd_step {
            if !(h > 0.0) {
                return Err(Error::Config("fd_step must be positive".into()));
            }
        }
        if self.free.is_empty() {
            return Err(Error::Config("free_params is empty".into()));
        }
        if !(self.smoothing_length >= 0.0) {
            return Err(Error::Config("smoothing length must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub alpha: f64,
    /// ‖W^{1/2}(data − F(u_n))‖ before the step.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Discrepancy,
    ResidualFloor,
    MaxOuter,
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub u: InversionUnknowns,
    pub model: SolarModel,
    /// Relative L² errors of δc, δρ, δγ when a truth model was supplied.
    pub errors: Option<[Option<f64>; 3]>,
    pub history: Vec<IterationRecord>,
    pub final_residual: f64,
    pub stop: StopReason,
    /// Noise level used by the discrepancy principle.
    pub delta: Option<f64>,
}

/// Per-cell weights for `data` restricted to the forward cells.
fn cell_weights(fwd: &ForwardModel, data: &ScatteringTable, mode: WeightMode) -> Result<(Vec<usize>, Vec<f64>)> {
    let cfg = fwd.config();
    if data.ell_max < cfg.ell_max {
        return Err(Error::Config(format!("data stop at ell {} but the forward map needs {}", data.ell_max, cfg.ell_max)));
    }
    let mut wmap = Vec::with_capacity(cfg.omegas.len());
    for &w in &cfg.omegas {
        let i = data.omegas.iter().position(|&d| (d - w).abs() <= 1e-12 * w).ok_or_else(|| {
            Error::Config(format!("data have no frequency {w} rad/s"))
        })?;
        wmap.push(i);
    }
    let mut idx = Vec::with_capacity(fwd.n_cells());
    let mut weights = Vec::with_capacity(fwd.n_cells());
    for l in 0..=cfg.ell_max {
        for &wd in &wmap {
            let i = data.index(l, wd);
            idx.push(i);
            let ok = data.valid[i] && data.s[i].re.is_finite() && data.s[i].im.is_finite();
            weights.push(match (ok, mode) {
                (false, _) => 0.0,
                (true, WeightMode::Uniform) => 1.0,
                (true, WeightMode::InverseCondition) => (1.0 / data.condition[i]).min(1.0),
            });
        }
    }
    Ok((idx, weights))
}

/// Noise level δ = ‖W^{1/2}σ‖ of the recovered s implied by noisy
/// diagonals: each Im G carries a standard deviation Im G/√N, propagated
/// through the two-height system of its cell.
pub fn noise_level(
    diag: &GreensDiagonal,
    model: &SolarModel,
    data: &ScatteringTable,
    fwd: &ForwardModel,
    mode: WeightMode,
) -> Result<f64> {
    let n = diag.n_segments.ok_or_else(|| Error::Config("diagonals carry no segment count".into()))? as f64;
    let (idx, weights) = cell_weights(fwd, data, mode)?;
    let geom = TailGeometry::of(model);
    let mut sigma2 = vec![0.0; data.len()];
    for (w, &omega) in diag.omegas.iter().enumerate() {
        let Some(wd) = data.omegas.iter().position(|&d| d == omega) else { continue };
        let k = wavenumber(model, omega)?;
        for sys in two_height_systems(diag, w, k, geom)? {
            if sys.ell > data.ell_max {
                continue;
            }
            let sd = [diag.get(0, sys.ell, w) / n.sqrt(), diag.get(1, sys.ell, w) / n.sqrt()];
            let (a, b) = sys.propagate(sd);
            sigma2[data.index(sys.ell, wd)] = a * a + b * b;
        }
    }
    Ok(idx.iter().zip(&weights).map(|(&i, &wt)| if wt > 0.0 { wt * sigma2[i] } else { 0.0 }).sum::<f64>().sqrt())
}

/// Gram matrix of the penalty on one block: trapezoid L² plus
/// ℓ_s²·∫|x'|², in internal units.
fn block_penalty(n: usize, h: f64, smoothing: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = if i == 0 || i + 1 == n { 0.5 * h } else { h };
    }
    let c = smoothing * smoothing / h;
    for i in 0..n - 1 {
        m[(i, i)] += c;
        m[(i + 1, i + 1)] += c;
        m[(i, i + 1)] -= c;
        m[(i + 1, i)] -= c;
    }
    m
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let mut v = DVector::from_element(a.nrows(), 1.0);
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w = a * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w) / v.dot(&v);
        v = w / nw;
        if (next - lambda).abs() <= 1e-6 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Weighted residual rows W^{1/2}(data − F) and its norm.
fn residual(data: &ScatteringTable, idx: &[usize], weights: &[f64], s: &[num_complex::Complex64]) -> DVector<f64> {
    let mut r = DVector::zeros(2 * s.len());
    for (c, (&i, &w)) in idx.iter().zip(weights).enumerate() {
        if w > 0.0 {
            let d = data.s[i] - s[c];
            let sw = w.sqrt();
            r[2 * c] = sw * d.re;
            r[2 * c + 1] = sw * d.im;
        }
    }
    r
}

/// Iteratively regularised Gauss–Newton reconstruction of u from `data`.
///
/// u_{n+1} = u_n + (J*WJ + α_n M)^{−1}(J*W(data − F(u_n)) − α_n M(u_n − u0)),
/// α_n = α0·qⁿ.  With a noise level `delta` the iteration stops at the
/// first u_n with ‖W^{1/2}(data − F(u_n))‖ ≤ τδ; without it the iteration
/// runs to `max_outer` or to the residual floor.
pub fn irgnm(
    data: &ScatteringTable,
    fwd: &ForwardModel,
    icfg: &IrgnmConfig,
    delta: Option<f64>,
) -> Result<ReconstructionResult> {
    irgnm_observed(data, fwd, icfg, delta, |_, _| {})
}

/// [`irgnm`] calling `observe(n, u_n)` on every iterate, u_0 included.
pub fn irgnm_observed(
    data: &ScatteringTable,
    fwd: &ForwardModel,
    icfg: &IrgnmConfig,
    delta: Option<f64>,
    mut observe: impl FnMut(usize, &InversionUnknowns),
) -> Result<ReconstructionResult> {
    icfg.validate()?;
    let map: ParamMap = fwd.param_map(&icfg.free)?;
    let (idx, weights) = cell_weights(fwd, data, icfg.weight_mode)?;
    let grid = *fwd.grid();
    let n = grid.n;
    let nb = map.n_free();
    let h = grid.spacing() / fwd.config().background.solar_radius();
    let width = (grid.a2 - grid.a1) / fwd.config().background.solar_radius();
    let pb = block_penalty(n, h, icfg.smoothing_length * width);
    let mut pen = DMatrix::zeros(nb * n, nb * n);
    for b in 0..nb {
        pen.view_mut((b * n, b * n), (n, n)).copy_from(&pb);
    }
    let data_norm = residual(data, &idx, &weights, &vec![num_complex::Complex64::new(0.0, 0.0); idx.len()]).norm();

    let mut x = DVector::<f64>::zeros(nb * n);
    let mut history = Vec::new();
    let mut alpha = icfg.alpha0;
    let mut increases = 0;
    let mut last_res = f64::INFINITY;
    let mut stop = StopReason::MaxOuter;
    let mut outer = 0;
    let final_res = loop {
        let full = map.spread(x.as_slice());
        observe(outer, &fwd.unknowns_from_scaled(&full));
        let (s, j_full) = match icfg.fd_step {
            None => fwd.evaluate_with_jacobian(&full)?,
            Some(step) => (fwd.evaluate(&full)?, fwd.jacobian_fd(&full, step)?),
        };
        let r = residual(data, &idx, &weights, &s);
        let res = r.norm();
        if let Some(d) = delta {
            if res <= icfg.tau_discrepancy * d {
                stop = StopReason::Discrepancy;
                break res;
            }
        } else if res <= icfg.rel_residual_floor * data_norm {
            stop = StopReason::ResidualFloor;
            break res;
        }
        if outer == icfg.max_outer {
            break res;
        }
        if res > last_res * (1.0 + 1e-9) {
            increases += 1;
            if increases >= 3 {
                return Err(Error::Divergence(format!(
                    "residual grew for 3 consecutive steps, now {res:e} at iteration {outer}"
                )));
            }
        } else {
            increases = 0;
        }
        last_res = res;
        let mut j = map.reduce(&j_full);
        for (c, &w) in weights.iter().enumerate() {
            let sw = w.sqrt();
            j.row_mut(2 * c).scale_mut(sw);
            j.row_mut(2 * c + 1).scale_mut(sw);
        }
        let jtj = j.transpose() * &j;
        let a = *alpha.get_or_insert_with(|| spectral_norm(&jtj) / spectral_norm(&pen));
        let a_n = a * icfg.q_factor.powi(outer as i32);
        history.push(IterationRecord { iteration: outer, alpha: a_n, residual: res });
        let lhs = &jtj + &pen * a_n;
        let rhs = j.transpose() * &r - (&pen * &x) * a_n;
        let chol = lhs
            .cholesky()
            .ok_or_else(|| Error::LinearSolve(format!("normal equations not positive definite at iteration {outer}")))?;
        x += chol.solve(&rhs);
        outer += 1;
    };
    let u = fwd.unknowns_from_scaled(&map.spread(x.as_slice()));
    let model = super::recover_parameters(&u, &fwd.config().background)?;
    Ok(ReconstructionResult { u, model, errors: None, history, final_residual: final_res, stop, delta })
}

impl ReconstructionResult {
    /// Fills in the errors against a truth model.
    pub fn with_truth(mut self, truth: &SolarModel, background: &SolarModel) -> Self {
        self.errors = Some(super::reconstruction_errors(&self.model, truth, background, &self.u.grid));
        self
    }
}
