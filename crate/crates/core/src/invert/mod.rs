//! Forward map u ↦ s, its derivative, the regularised Gauss–Newton
//! reconstruction and the final recovery of (c, ρ, γ).
//!
//! Unknowns are carried as a scaled deviation x from the background:
//! block p holds (u_p − u0_p)·scale_p with scale = (ω_ref²L², L², 2ω_refL²),
//! so all three blocks are potentials in internal units of comparable size.
//! Only the free parameter blocks enter x; [`ParamMap`] spreads them onto
//! (u1, u2, u3).

mod irgnm;
mod parameters;

pub use irgnm::{
    irgnm, irgnm_observed, noise_level, IrgnmConfig, IterationRecord, ReconstructionResult, StopReason, WeightMode,
};
pub use parameters::{reconstruction_errors, recover_parameters, relative_l2_error, solve_density_bvp};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::radial::{
    match_scattering, regular_checkpoint, resume_regular, RadialOptions, RadialSolution, RegularCheckpoint,
};
use crate::recover::ScatteringTable;
use crate::solar_model::{
    potential_from_model, unknowns_from_model, InversionUnknowns, Perturbation, PotentialProfile, SolarModel,
    UnknownGrid,
};

type C = Complex64;

/// One of the three physical parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    C,
    Rho,
    Gamma,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::C, Param::Rho, Param::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Param::C => "c",
            Param::Rho => "rho",
            Param::Gamma => "gamma",
        }
    }

    pub fn parse(s: &str) -> Result<Param> {
        match s {
            "c" => Ok(Param::C),
            "rho" => Ok(Param::Rho),
            "gamma" => Ok(Param::Gamma),
            _ => Err(Error::Config(format!("unknown parameter {s:?}, expected c, rho or gamma"))),
        }
    }
}

/// What the forward map is evaluated on.
#[derive(Clone, Debug)]
pub struct ForwardConfig {
    /// [A1, A2] in m.
    pub interval: (f64, f64),
    pub n_grid: usize,
    pub ell_max: usize,
    pub omegas: Vec<f64>,
    pub background: SolarModel,
    pub radial: RadialOptions,
}

impl ForwardConfig {
    pub fn new(background: SolarModel, interval: (f64, f64), n_grid: usize, ell_max: usize, omegas: Vec<f64>) -> Self {
        ForwardConfig { interval, n_grid, ell_max, omegas, background, radial: RadialOptions::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let (a1, a2) = self.interval;
        let rs = self.background.solar_radius();
        if !(a1 > 0.0 && a2 > a1 && a2 <= rs) {
            return Err(Error::Config(format!("interval [{a1}, {a2}] m must lie in (0, R_sun = {rs}]")));
        }
        if self.n_grid < 4 {
            return Err(Error::Config(format!("n_grid = {} but at least 4 nodes are needed", self.n_grid)));
        }
        if self.omegas.len() < 2 {
            return Err(Error::Config("at least two frequencies are needed".into()));
        }
        for &w in &self.omegas {
            crate::solar_model::wavenumber(&self.background, w)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<UnknownGrid> {
        UnknownGrid::new(self.interval.0, self.interval.1, self.n_grid)
    }
}

/// Linear map from the free blocks of x onto scaled (δu1, δu2, δu3).
///
/// With γ known, moving c also moves u3 = γ/c² = γ(1/c0² − u1), so the c
/// direction carries −γ·δu1 into the third block.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamMap {
    pub free: Vec<Param>,
    /// −γ0(r_j)·scale3/scale1 at the nodes; used when c is free and γ is not.
    c_to_u3: Vec<f64>,
}

impl ParamMap {
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Scaled (δu1, δu2, δu3) blocks, 3n long.
    pub fn spread(&self, x: &[f64]) -> Vec<f64> {
        let n = self.c_to_u3.len();
        let mut full = vec![0.0; 3 * n];
        let gamma_free = self.free.contains(&Param::Gamma);
        for (b, p) in self.free.iter().enumerate() {
            let xb = &x[b * n..(b + 1) * n];
            match p {
                Param::C => {
                    full[..n].copy_from_slice(xb);
                    if !gamma_free {
                        for j in 0..n {
                            full[2 * n + j] += self.c_to_u3[j] * xb[j];
                        }
                    }
                }
                Param::Rho => full[n..2 * n].copy_from_slice(xb),
                Param::Gamma => {
                    for j in 0..n {
                        full[2 * n + j] += xb[j];
                    }
                }
            }
        }
        full
    }

    /// Reduces a Jacobian over all three scaled blocks to the free ones.
    pub fn reduce(&self, j_full: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.c_to_u3.len();
        let gamma_free = self.free.contains(&Param::Gamma);
        let mut out = DMatrix::zeros(j_full.nrows(), self.n_free() * n);
        for (b, p) in self.free.iter().enumerate() {
            for j in 0..n {
                let mut col = match p {
                    Param::C => j_full.column(j).into_owned(),
                    Param::Rho => j_full.column(n + j).into_owned(),
                    Param::Gamma => j_full.column(2 * n + j).into_owned(),
                };
                if *p == Param::C && !gamma_free {
                    col += j_full.column(2 * n + j) * self.c_to_u3[j];
                }
                out.set_column(b * n + j, &col);
            }
        }
        out
    }

    /// Least-squares inverse of [`spread`](Self::spread) on the free blocks.
    pub fn project(&self, full: &[f64]) -> Vec<f64> {
        let n = self.c_to_u3.len();
        let mut x = vec![0.0; self.n_free() * n];
        for (b, p) in self.free.iter().enumerate() {
            let src = match p {
                Param::C => &full[..n],
                Param::Rho => &full[n..2 * n],
                Param::Gamma => &full[2 * n..],
            };
            x[b * n..(b + 1) * n].copy_from_slice(src);
        }
        x
    }
}

/// The forward map at fixed background, with the regular solutions stored
/// at A1 for every (ℓ, ω).
pub struct ForwardModel {
    cfg: ForwardConfig,
    grid: UnknownGrid,
    u0: InversionUnknowns,
    pots: Vec<PotentialProfile>,
    checkpoints: Vec<RegularCheckpoint>,
    nodes_hat: Vec<f64>,
    scale: [f64; 3],
    omega_ref: f64,
}

/// Forward values and, optionally, dŝ/dv̂_j at every node, per cell.
struct CellOutput {
    s: C,
    dv: Option<Vec<C>>,
}

impl ForwardModel {
    pub fn new(cfg: ForwardConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let u0 = unknowns_from_model(&cfg.background, &cfg.background, &grid)?;
        let pots =
            cfg.omegas.iter().map(|&w| potential_from_model(&cfg.background, w)).collect::<Result<Vec<_>>>()?;
        let nw = cfg.omegas.len();
        let cells: Vec<(usize, usize)> = (0..=cfg.ell_max).flat_map(|l| (0..nw).map(move |w| (l, w))).collect();
        let a1 = cfg.interval.0;
        let checkpoints = cells
            .par_iter()
            .map(|&(l, w)| regular_checkpoint(&pots[w], l, a1, &cfg.radial))
            .collect::<Result<Vec<_>>>()?;
        let l = cfg.background.solar_radius();
        let nodes_hat = grid.nodes().iter().map(|r| r / l).collect();
        let omega_ref = cfg.omegas.iter().copied().fold(0.0, f64::max);
        let scale = [omega_ref * omega_ref * l * l, l * l, 2.0 * omega_ref * l * l];
        Ok(ForwardModel { cfg, grid, u0, pots, checkpoints, nodes_hat, scale, omega_ref })
    }

    pub fn config(&self) -> &ForwardConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &UnknownGrid {
        &self.grid
    }

    /// Background unknowns u0.
    pub fn background_unknowns(&self) -> &InversionUnknowns {
        &self.u0
    }

    pub fn n_cells(&self) -> usize {
        (self.cfg.ell_max + 1) * self.cfg.omegas.len()
    }

    /// Map for the given free parameters.
    pub fn param_map(&self, free: &[Param]) -> Result<ParamMap> {
        let mut f: Vec<Param> = free.to_vec();
        f.sort();
        f.dedup();
        if f.is_empty() {
            return Err(Error::Config("no free parameters".into()));
        }
        let ratio = self.scale[2] / self.scale[0];
        let c_to_u3 =
            self.grid.nodes().iter().map(|&r| -self.cfg.background.attenuation(r) * ratio).collect();
        Ok(ParamMap { free: f, c_to_u3 })
    }

    /// Scaled deviation of `u` from the background, all three blocks.
    pub fn scaled_deviation(&self, u: &InversionUnknowns) -> Result<Vec<f64>> {
        let n = self.grid.n;
        if u.grid.len() != n || u.interval != self.u0.interval {
            return Err(Error::Config("unknowns are not on the forward grid".into()));
        }
        let mut x = Vec::with_capacity(3 * n);
        for (p, (a, b)) in [(&u.u1, &self.u0.u1), (&u.u2, &self.u0.u2), (&u.u3, &self.u0.u3)].iter().enumerate() {
            x.extend(a.iter().zip(b.iter()).map(|(ai, bi)| (ai - bi) * self.scale[p]));
        }
        Ok(x)
    }

    /// Unknowns from a full scaled deviation.
    pub fn unknowns_from_scaled(&self, full: &[f64]) -> InversionUnknowns {
        let n = self.grid.n;
        let mut u = self.u0.clone();
        for j in 0..n {
            u.u1[j] += full[j] / self.scale[0];
            u.u2[j] += full[n + j] / self.scale[1];
            u.u3[j] += full[2 * n + j] / self.scale[2];
        }
        u
    }

    /// Background potential at frequency `w` plus the piecewise-linear
    /// deviation `full`.
    fn perturbed(&self, w: usize, full: &[f64]) -> PotentialProfile {
        let n = self.grid.n;
        let r = self.cfg.omegas[w] / self.omega_ref;
        let values = (0..n).map(|j| C::new(r * r * full[j] + full[n + j], -r * full[2 * n + j])).collect();
        self.pots[w].with_perturbation(Perturbation { nodes: self.nodes_hat.clone(), values })
    }

    fn cell(&self, l: usize, w: usize, pot: &PotentialProfile, jac: bool) -> Result<CellOutput> {
        let cp = &self.checkpoints[l * self.cfg.omegas.len() + w];
        let sol = resume_regular(pot, cp, pot.r_a, &self.cfg.radial)?;
        let m = match_scattering(&sol, pot)?;
        let dv = jac.then(|| self.node_sensitivities(&sol, m.b, m.b_log_scale, pot.kappa()));
        Ok(CellOutput { s: m.s, dv })
    }

    /// ds/dv̂_j = −∫ hat_j φ² dx / (2iκ b²) for the hat functions of the
    /// node grid.
    fn node_sensitivities(&self, sol: &RadialSolution, b: C, b_ls: f64, kappa: f64) -> Vec<C> {
        let x = &self.nodes_hat;
        let n = x.len();
        let mut out = vec![C::new(0.0, 0.0); n];
        for k in 0..n - 1 {
            let (x0, x1) = (x[k], x[k + 1]);
            let h = x1 - x0;
            let down = sol.integral_phi2(x0, x1, b_ls, |t| C::new((x1 - t) / h, 0.0));
            let up = sol.integral_phi2(x0, x1, b_ls, |t| C::new((t - x0) / h, 0.0));
            out[k] += down;
            out[k + 1] += up;
        }
        let f = -C::new(0.0, 2.0 * kappa) * b * b;
        out.iter().map(|v| v / f).collect()
    }

    fn sweep(&self, full: &[f64], jac: bool) -> Result<Vec<CellOutput>> {
        let nw = self.cfg.omegas.len();
        let pots: Vec<PotentialProfile> = (0..nw).map(|w| self.perturbed(w, full)).collect();
        (0..self.n_cells()).into_par_iter().map(|i| self.cell(i / nw, i % nw, &pots[i % nw], jac)).collect()
    }

    /// s at every cell for a full scaled deviation, index ℓ·|Ω| + ω.
    pub fn evaluate(&self, full: &[f64]) -> Result<Vec<C>> {
        Ok(self.sweep(full, false)?.into_iter().map(|c| c.s).collect())
    }

    /// s and the analytic Jacobian over all three scaled blocks.  Rows
    /// alternate Re and Im of each cell.
    pub fn evaluate_with_jacobian(&self, full: &[f64]) -> Result<(Vec<C>, DMatrix<f64>)> {
        let out = self.sweep(full, true)?;
        let n = self.grid.n;
        let nw = self.cfg.omegas.len();
        let mut j = DMatrix::zeros(2 * out.len(), 3 * n);
        for (i, c) in out.iter().enumerate() {
            let r = self.cfg.omegas[i % nw] / self.omega_ref;
            let dv = c.dv.as_ref().expect("requested");
            for (k, d) in dv.iter().enumerate() {
                let cols = [*d * (r * r), *d, *d * C::new(0.0, -r)];
                for (p, v) in cols.iter().enumerate() {
                    j[(2 * i, p * n + k)] = v.re;
                    j[(2 * i + 1, p * n + k)] = v.im;
                }
            }
        }
        Ok((out.iter().map(|c| c.s).collect(), j))
    }

    /// One-sided finite-difference Jacobian with steps
    /// `fd_step·max(|x_j|, ‖x‖∞, 1)`.
    pub fn jacobian_fd(&self, full: &[f64], fd_step: f64) -> Result<DMatrix<f64>> {
        let base = self.evaluate(full)?;
        let floor = full.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let mut j = DMatrix::zeros(2 * base.len(), full.len());
        for col in 0..full.len() {
            let h = fd_step * full[col].abs().max(floor);
            let mut xp = full.to_vec();
            xp[col] += h;
            let sp = self.evaluate(&xp)?;
            for (i, (a, b)) in sp.iter().zip(&base).enumerate() {
                let d = (a - b) / h;
                j[(2 * i, col)] = d.re;
                j[(2 * i + 1, col)] = d.im;
            }
        }
        Ok(j)
    }

    /// The forward map on unknowns, as a scattering table.
    pub fn forward(&self, u: &InversionUnknowns) -> Result<ScatteringTable> {
        let s = self.evaluate(&self.scaled_deviation(u)?)?;
        let mut t = ScatteringTable::new(self.cfg.ell_max, self.cfg.omegas.clone());
        t.s = s;
        Ok(t)
    }

    /// Jacobian with respect to all three scaled blocks at `u`.
    pub fn jacobian(&self, u: &InversionUnknowns) -> Result<DMatrix<f64>> {
        Ok(self.evaluate_with_jacobian(&self.scaled_deviation(u)?)?.1)
    }
}

/// Runs the forward map once for `u` on a configuration.
pub fn forward(u: &InversionUnknowns, cfg: &ForwardConfig) -> Result<ScatteringTable> {
    ForwardModel::new(cfg.clone())?.forward(u)
}

/// Singular values of the background Jacobian for the given free
/// parameters, weighted by `weights` per cell, in decreasing order.
pub fn background_singular_values(fwd: &ForwardModel, free: &[Param], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let map = fwd.param_map(free)?;
    let zero = vec![0.0; 3 * fwd.grid().n];
    let (_, j) = fwd.evaluate_with_jacobian(&zero)?;
    let mut j = map.reduce(&j);
    if let Some(w) = weights {
        for (i, wi) in w.iter().enumerate() {
            let s = wi.sqrt();
            j.row_mut(2 * i).scale_mut(s);
            j.row_mut(2 * i + 1).scale_mut(s);
        }
    }
    let mut sv: Vec<f64> = j.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}
