use crate::error::{Error, Result};
use crate::solar_model::{InversionUnknowns, SolarModel};
use crate::spline::CubicSpline;

/// Pivots smaller than this times the diagonal scale mark the density
/// problem as near-singular.
const PIVOT_LIMIT: f64 = 1e-10;

/// w = ρ^{−1/2} on the nodes from w'' + (2/r)w' = (u2 + 1/(4H²))·w with
/// w given at both ends; second-order central differences, Thomas solve.
pub fn solve_density_bvp(nodes: &[f64], u2: &[f64], inv_4h2: f64, w_left: f64, w_right: f64) -> Result<Vec<f64>> {
    let n = nodes.len();
    if n < 3 || u2.len() != n {
        return Err(Error::Config("density problem needs at least three nodes".into()));
    }
    let h = (nodes[n - 1] - nodes[0]) / (n - 1) as f64;
    let m = n - 2;
    // row i: lo·w_{i−1} + di·w_i + up·w_{i+1} = 0
    let mut lo = vec![0.0; m];
    let mut di = vec![0.0; m];
    let mut up = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for k in 0..m {
        let i = k + 1;
        let r = nodes[i];
        lo[k] = 1.0 / (h * h) - 1.0 / (r * h);
        up[k] = 1.0 / (h * h) + 1.0 / (r * h);
        di[k] = -2.0 / (h * h) - (u2[i] + inv_4h2);
    }
    rhs[0] -= lo[0] * w_left;
    rhs[m - 1] -= up[m - 1] * w_right;
    let scale = 2.0 / (h * h);
    for k in 1..m {
        if !(di[k - 1].abs() > PIVOT_LIMIT * scale) {
            return Err(Error::LinearSolve(format!("density problem is near-singular at r = {} m", nodes[k])));
        }
        let f = lo[k] / di[k - 1];
        di[k] -= f * up[k - 1];
        rhs[k] -= f * rhs[k - 1];
    }
    if !(di[m - 1].abs() > PIVOT_LIMIT * scale) {
        return Err(Error::LinearSolve(format!("density problem is near-singular at r = {} m", nodes[m])));
    }
    let mut w = vec![0.0; n];
    w[0] = w_left;
    w[n - 1] = w_right;
    w[m] = rhs[m - 1] / di[m - 1];
    for k in (0..m - 1).rev() {
        w[k + 1] = (rhs[k] - up[k] * w[k + 2]) / di[k];
    }
    Ok(w)
}

/// (c, ρ, γ) at the nodes of `u` from the explicit formulas and the
/// density problem.
pub(crate) fn node_parameters(u: &InversionUnknowns, background: &SolarModel) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let atm = background.atmosphere();
    let inv_c02 = 1.0 / (atm.c0 * atm.c0);
    let mut c = Vec::with_capacity(u.grid.len());
    let mut gamma = Vec::with_capacity(u.grid.len());
    for (j, &r) in u.grid.iter().enumerate() {
        let d = inv_c02 - u.u1[j];
        if !(d > 0.0) {
            return Err(Error::Positivity(format!("u1 = {:e} ≥ 1/c0² at r = {r} m", u.u1[j])));
        }
        let cj = d.powf(-0.5);
        c.push(cj);
        gamma.push(cj * cj * u.u3[j]);
    }
    let n = u.grid.len();
    let wl = background.density(u.grid[0]).powf(-0.5);
    let wr = background.density(u.grid[n - 1]).powf(-0.5);
    let inv_4h2 = 0.25 / (atm.scale_height * atm.scale_height);
    let w = solve_density_bvp(&u.grid, &u.u2, inv_4h2, wl, wr)?;
    if let Some(j) = w.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Positivity(format!("rho^(-1/2) = {:e} at r = {} m", w[j], u.grid[j])));
    }
    let rho = w.iter().map(|v| 1.0 / (v * v)).collect();
    Ok((c, rho, gamma))
}

/// Background with (c, ρ, γ) on [A1, A2] replaced by the values implied by
/// `u`, interpolated onto the background knots by natural cubic splines.
pub fn recover_parameters(u: &InversionUnknowns, background: &SolarModel) -> Result<SolarModel> {
    let (c, rho, gamma) = node_parameters(u, background)?;
    let x = u.grid.clone();
    let cs = CubicSpline::new(x.clone(), c);
    let rs = CubicSpline::new(x.clone(), rho.iter().map(|v| v.ln()).collect());
    let gs = CubicSpline::new(x, gamma);
    let (a1, a2) = (u.grid[0], u.grid[u.grid.len() - 1]);
    background.map_rows(|r, c0, rho0, g0| {
        if r >= a1 && r <= a2 {
            (cs.eval(r), rs.eval(r).exp(), gs.eval(r))
        } else {
            (c0, rho0, g0)
        }
    })
}

/// ‖f − f_truth‖/‖f_truth‖ in L² over the shared grid, trapezoid rule.
pub fn relative_l2_error(f: &[f64], f_truth: &[f64], grid: &[f64]) -> Result<f64> {
    if f.len() != grid.len() || f_truth.len() != grid.len() || grid.len() < 2 {
        return Err(Error::Config("profiles must share one grid of at least two points".into()));
    }
    let trap = |g: &dyn Fn(usize) -> f64| {
        grid.windows(2).enumerate().map(|(i, w)| 0.5 * (w[1] - w[0]) * (g(i) + g(i + 1))).sum::<f64>()
    };
    let num = trap(&|i| (f[i] - f_truth[i]).powi(2));
    let den = trap(&|i| f_truth[i].powi(2));
    if !(den > 0.0) {
        return Err(Error::ZeroReference);
    }
    Ok((num / den).sqrt())
}

/// Relative L² errors of the perturbations δc, δρ, δγ of `reconstructed`
/// against those of `truth`, both measured from `background` on `grid`.
/// A parameter the truth leaves unperturbed gets `None`.
pub fn reconstruction_errors(
    reconstructed: &SolarModel,
    truth: &SolarModel,
    background: &SolarModel,
    grid: &[f64],
) -> [Option<f64>; 3] {
    let fields: [fn(&SolarModel, f64) -> f64; 3] =
        [SolarModel::sound_speed, SolarModel::density, SolarModel::attenuation];
    let mut out = [None; 3];
    for (p, f) in fields.iter().enumerate() {
        let d = |m: &SolarModel| grid.iter().map(|&r| f(m, r) - f(background, r)).collect::<Vec<f64>>();
        out[p] = relative_l2_error(&d(reconstructed), &d(truth), grid).ok();
    }
    out
}
