//! Measurement layer: Im G on the diagonal at observation heights, either
//! exact or estimated from averaged power spectra.
//!
//! A power spectrum averaged over N independent segments is P·X/(2N) with
//! X ~ χ²(2N) and P = Π·Im G(r,r).  Dividing by Π gives an unbiased
//! estimate of Im G with relative variance 1/N.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::radial::{radial_greens_with, GreensOptions, RadialOptions};
use crate::solar_model::{potential_from_model, wavenumber, PotentialProfile, SolarModel};
use crate::table::{self, Field, TableWriter};

/// Name of the random generator family written into noisy files.
pub const RNG_FAMILY: &str = "ChaCha20Rng";
/// Above this many segments χ²(2N) is drawn as Gamma(N, 2) instead of a sum
/// of squared normals.
pub const EXACT_CHI2_LIMIT: usize = 1000;

/// What is observed and how often.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSetup {
    /// Heights above R_⊙ in m, strictly increasing.
    pub heights: Vec<f64>,
    /// Angular frequencies in rad/s.
    pub omegas: Vec<f64>,
    pub ell_max: usize,
    /// Number of averaged periodograms N.
    pub n_segments: usize,
    /// Source strength Π, either one value or one per frequency.
    pub pi: Vec<f64>,
    pub seed: u64,
}

impl ObservationSetup {
    pub fn new(heights: Vec<f64>, omegas: Vec<f64>, ell_max: usize) -> Self {
        ObservationSetup { heights, omegas, ell_max, n_segments: 1, pi: vec![1.0], seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heights.len() < 2 {
            return Err(Error::Config("at least two observation heights are needed".into()));
        }
        if self.heights.iter().any(|h| !(h.is_finite() && *h >= 0.0))
            || self.heights.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(Error::Config("heights must be nonnegative and strictly increasing".into()));
        }
        if self.omegas.is_empty() || self.omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Config("frequencies must be positive".into()));
        }
        if self.n_segments == 0 {
            return Err(Error::Config("number of segments must be at least 1".into()));
        }
        if !(self.pi.len() == 1 || self.pi.len() == self.omegas.len()) || self.pi.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Config("source strength must be one positive value or one per frequency".into()));
        }
        Ok(())
    }

    /// Π at frequency index `w`.
    pub fn pi_at(&self, w: usize) -> f64 {
        if self.pi.len() == 1 {
            self.pi[0]
        } else {
            self.pi[w]
        }
    }
}

/// Im G(R_⊙+h, R_⊙+h) over (height, ℓ, ω).
#[derive(Clone, Debug, PartialEq)]
pub struct GreensDiagonal {
    pub heights: Vec<f64>,
    pub ell_max: usize,
    pub omegas: Vec<f64>,
    /// Flattened with ω fastest, see [`GreensDiagonal::index`].
    pub values: Vec<f64>,
    pub is_noisy: bool,
    pub n_segments: Option<usize>,
    /// Master seed of a noisy draw.
    pub seed: Option<u64>,
}

impl GreensDiagonal {
    pub fn n_ell(&self) -> usize {
        self.ell_max + 1
    }

    /// Cell index (h·(ℓ_max+1) + ℓ)·|Ω| + ω; also the random stream id of
    /// the cell.
    pub fn index(&self, h: usize, ell: usize, w: usize) -> usize {
        (h * self.n_ell() + ell) * self.omegas.len() + w
    }

    pub fn get(&self, h: usize, ell: usize, w: usize) -> f64 {
        self.values[self.index(h, ell, w)]
    }
}

/// Exact Im G on the diagonal from the radial solver.
pub fn exact_diagonals(model: &SolarModel, setup: &ObservationSetup) -> Result<GreensDiagonal> {
    exact_diagonals_with(model, setup, &RadialOptions::default())
}

pub fn exact_diagonals_with(
    model: &SolarModel,
    setup: &ObservationSetup,
    radial: &RadialOptions,
) -> Result<GreensDiagonal> {
    diagonals_from_potentials(|w| potential_from_model(model, w), model.solar_radius(), setup, radial)
}

/// Same as [`exact_diagonals_with`] for potentials built by `potential`;
/// heights are measured from `r_sun`.
pub fn diagonals_from_potentials(
    potential: impl Fn(f64) -> Result<PotentialProfile>,
    r_sun: f64,
    setup: &ObservationSetup,
    radial: &RadialOptions,
) -> Result<GreensDiagonal> {
    setup.validate()?;
    let mut out = GreensDiagonal {
        heights: setup.heights.clone(),
        ell_max: setup.ell_max,
        omegas: setup.omegas.clone(),
        values: vec![0.0; setup.heights.len() * (setup.ell_max + 1) * setup.omegas.len()],
        is_noisy: false,
        n_segments: None,
        seed: None,
    };
    let radii: Vec<f64> = setup.heights.iter().map(|h| r_sun + h).collect();
    let mut opts = GreensOptions { radial: radial.clone(), ..GreensOptions::default() };
    opts.radial.nodes.extend(&radii);
    opts.r_inner = Some(radii[0]);
    for (w, &omega) in setup.omegas.iter().enumerate() {
        let pot = potential(omega)?;
        for ell in 0..=setup.ell_max {
            let g = radial_greens_with(&pot, ell, &opts)?;
            for (h, &r) in radii.iter().enumerate() {
                let i = out.index(h, ell, w);
                out.values[i] = g.diagonal(r)?.im;
            }
        }
    }
    Ok(out)
}

/// One draw of χ²(2N)/(2N) from `rng`.
pub fn chi2_ratio(n: usize, rng: &mut ChaCha20Rng) -> f64 {
    let m = 2 * n;
    let x: f64 = if n <= EXACT_CHI2_LIMIT {
        (0..m)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * z
            })
            .sum()
    } else {
        Gamma::new(n as f64, 2.0).expect("valid gamma parameters").sample(rng)
    };
    x / m as f64
}

/// Generator of cell `cell` under master seed `seed`: ChaCha20 seeded with
/// `seed_from_u64(seed)` and switched to stream `cell`.
pub fn cell_rng(seed: u64, cell: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(cell as u64);
    rng
}

/// Noisy Im G estimates: Π·Im G·X/(2N) divided back by Π.
pub fn simulate_power_spectrum(model: &SolarModel, setup: &ObservationSetup) -> Result<GreensDiagonal> {
    let exact = exact_diagonals(model, setup)?;
    add_noise(&exact, setup)
}

/// Draws the χ² noise on top of given exact diagonals.
pub fn add_noise(exact: &GreensDiagonal, setup: &ObservationSetup) -> Result<GreensDiagonal> {
    setup.validate()?;
    let mut out = exact.clone();
    for h in 0..exact.heights.len() {
        for ell in 0..=exact.ell_max {
            for (w, _) in exact.omegas.iter().enumerate() {
                let i = exact.index(h, ell, w);
                let g = exact.values[i];
                if !(g >= 0.0) {
                    return Err(Error::Consistency(format!(
                        "Im G = {g:e} < 0 at height {} m, ell {ell}, omega {} rad/s",
                        exact.heights[h], exact.omegas[w]
                    )));
                }
                let power = setup.pi_at(w) * g;
                let mut rng = cell_rng(setup.seed, i);
                out.values[i] = power * chi2_ratio(setup.n_segments, &mut rng) / setup.pi_at(w);
            }
        }
    }
    out.is_noisy = true;
    out.n_segments = Some(setup.n_segments);
    out.seed = Some(setup.seed);
    Ok(out)
}

/// Segment count and spectral limits of an observation campaign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentPlan {
    pub n_segments: usize,
    /// Cyclic frequency resolution 1/T_segment, Hz.
    pub freq_resolution: f64,
    /// Nyquist frequency 1/(2Δt), Hz.
    pub max_freq: f64,
}

/// Durations in seconds.
pub fn segment_plan(total: f64, segment: f64, cadence: f64) -> Result<SegmentPlan> {
    if !(total > 0.0 && segment > 0.0 && cadence > 0.0) {
        return Err(Error::Config("durations must be positive".into()));
    }
    if segment > total {
        return Err(Error::Config("segment longer than the observation".into()));
    }
    // guard against 8 years / 3 days landing a hair below an integer
    let n = (total / segment * (1.0 + 4.0 * f64::EPSILON)).floor() as usize;
    if n == 0 {
        return Err(Error::Config("plan has no complete segment".into()));
    }
    Ok(SegmentPlan { n_segments: n, freq_resolution: 1.0 / segment, max_freq: 0.5 / cadence })
}

/// Checks every frequency against the cutoff of `model`.
pub fn check_above_cutoff(model: &SolarModel, omegas: &[f64]) -> Result<()> {
    for &w in omegas {
        wavenumber(model, w)?;
    }
    Ok(())
}

pub const DIAG_HEADER: &str = "# heliosolve-diag v1";
const DIAG_COLUMNS: [&str; 6] = ["height_m", "ell", "omega_rad_s", "im_G", "is_noisy", "N"];

/// Rows in index order.  Noisy files name the generator family and seed in
/// the header.
pub fn write_diagonal(d: &GreensDiagonal) -> String {
    let header = match d.seed {
        Some(seed) if d.is_noisy => format!("{DIAG_HEADER} rng={RNG_FAMILY} seed={seed}"),
        _ => DIAG_HEADER.to_string(),
    };
    let mut w = TableWriter::new(&header, &DIAG_COLUMNS);
    let n = d.n_segments.map(|n| n.to_string()).unwrap_or_default();
    for (h, &height) in d.heights.iter().enumerate() {
        for ell in 0..=d.ell_max {
            for (k, &omega) in d.omegas.iter().enumerate() {
                w.row(&[
                    Field::F(height),
                    Field::U(ell as u64),
                    Field::F(omega),
                    Field::F(d.get(h, ell, k)),
                    Field::B(d.is_noisy),
                    Field::S(&n),
                ]);
            }
        }
    }
    w.finish()
}

pub fn parse_diagonal(text: &str) -> Result<GreensDiagonal> {
    let t = table::read_table(text, DIAG_HEADER, &DIAG_COLUMNS)?;
    let seed = match table::header_value(&t.header_rest, "seed") {
        Some(s) => Some(s.parse().map_err(|_| Error::Parse { line: 1, msg: format!("bad seed {s}") })?),
        None => None,
    };
    let mut heights: Vec<f64> = Vec::new();
    let mut omegas: Vec<f64> = Vec::new();
    let mut ell_max = 0;
    let mut rows = Vec::with_capacity(t.rows.len());
    let mut noisy = None;
    let mut n_seg: Option<Option<usize>> = None;
    for (line, row) in &t.rows {
        let line = *line;
        let h = table::parse_f64(&row[0], line)?;
        let ell = table::parse_usize(&row[1], line)?;
        let w = table::parse_f64(&row[2], line)?;
        let v = table::parse_f64(&row[3], line)?;
        let is_noisy = table::parse_bool(&row[4], line)?;
        let n = if row[5].is_empty() { None } else { Some(table::parse_usize(&row[5], line)?) };
        if *noisy.get_or_insert(is_noisy) != is_noisy || *n_seg.get_or_insert(n) != n {
            return Err(Error::Parse { line, msg: "is_noisy and N must be the same on every row".into() });
        }
        if !heights.contains(&h) {
            heights.push(h);
        }
        if !omegas.contains(&w) {
            omegas.push(w);
        }
        ell_max = ell_max.max(ell);
        rows.push((line, h, ell, w, v));
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 2, msg: "no data rows".into() });
    }
    let mut d = GreensDiagonal {
        heights,
        ell_max,
        omegas,
        values: Vec::new(),
        is_noisy: noisy.unwrap_or(false),
        n_segments: n_seg.flatten(),
        seed,
    };
    let total = d.heights.len() * d.n_ell() * d.omegas.len();
    if rows.len() != total {
        return Err(Error::Parse {
            line: rows.last().map_or(2, |r| r.0),
            msg: format!("expected {total} rows for a full (height, ell, omega) grid, found {}", rows.len()),
        });
    }
    d.values = vec![f64::NAN; total];
    for (line, h, ell, w, v) in rows {
        let hi = d.heights.iter().position(|&x| x == h).unwrap();
        let wi = d.omegas.iter().position(|&x| x == w).unwrap();
        let i = d.index(hi, ell, wi);
        if !d.values[i].is_nan() {
            return Err(Error::Parse { line, msg: "duplicate cell".into() });
        }
        d.values[i] = v;
    }
    Ok(d)
}

pub fn save_diagonal(d: &GreensDiagonal, path: &Path) -> Result<()> {
    std::fs::write(path, write_diagonal(d))?;
    Ok(())
}

pub fn load_diagonal(path: &Path) -> Result<GreensDiagonal> {
    parse_diagonal(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests;
