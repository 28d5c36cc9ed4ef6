use std::path::{Path, PathBuf};

use heliosolve::invert::{IrgnmConfig, Param, WeightMode};
use heliosolve::solar_model::Atmosphere;
use heliosolve::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a run reads from the config file. Every section and key is
/// optional; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub log_level: LogLevel,
    /// Background model file; the built-in reference background when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    pub atmosphere: AtmosphereConfig,
    pub sun: SunConfig,
    pub observe: ObserveConfig,
    pub radial: RadialConfig,
    /// Bump added to the model before forward runs and simulations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
    pub invert: InvertConfig,
    pub scan: ScanConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    #[default]
    Info,
    Debug,
}

impl LogLevel {
    pub fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtmosphereConfig {
    pub c0: f64,
    pub rho0: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub h_a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SunConfig {
    pub radius: f64,
}

impl Default for AtmosphereConfig {
    fn default() -> Self {
        let a = Atmosphere::default();
        AtmosphereConfig { c0: a.c0, rho0: a.rho0, h: a.scale_height, h_a: a.interface_height }
    }
}

impl Default for SunConfig {
    fn default() -> Self {
        SunConfig { radius: Atmosphere::default().solar_radius }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserveConfig {
    /// Observation heights above the solar radius, m.
    pub heights_m: Vec<f64>,
    /// Cyclic frequencies in mHz; the solver works with ω = 2πν.
    pub frequencies_mhz: Vec<f64>,
    pub ell_max: usize,
    /// Number of averaged periodograms, unless a plan is given.
    pub n_segments: usize,
    /// Source strength Π, one value or one per frequency.
    pub pi: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanConfig>,
}

impl Default for ObserveConfig {
    fn default() -> Self {
        ObserveConfig {
            heights_m: vec![105e3, 144e3],
            frequencies_mhz: vec![5.3, 5.4],
            ell_max: 250,
            n_segments: 1,
            pi: vec![1.0],
            plan: None,
        }
    }
}

/// Observation campaign, all durations in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub total_s: f64,
    pub segment_s: f64,
    pub cadence_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadialConfig {
    pub rtol: f64,
}

impl Default for RadialConfig {
    fn default() -> Self {
        RadialConfig { rtol: heliosolve::radial::RadialOptions::default().rtol }
    }
}

/// A (1 − t²)³ bump on c (relative), ρ (relative) and γ (absolute, μHz of
/// cyclic frequency, i.e. δγ = 2π·dgamma_uhz·1e-6 rad/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub dc_rel: f64,
    pub drho_rel: f64,
    pub dgamma_uhz: f64,
    /// Centre and half-width in units of the solar radius.
    pub center: f64,
    pub half_width: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig { dc_rel: 0.0, drho_rel: 0.0, dgamma_uhz: 0.0, center: 0.925, half_width: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertConfig {
    /// Diagonals file to invert.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagonals: Option<PathBuf>,
    /// Truth model; errors are reported when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Inversion interval in units of the solar radius.
    pub interval: [f64; 2],
    pub n_grid: usize,
    /// Empty means all three for exact data and gamma alone for noisy data.
    pub free_params: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    pub q: f64,
    pub tau: f64,
    pub max_outer: usize,
    pub weight_mode: WeightModeConfig,
    pub smoothing_length: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightModeConfig {
    Uniform,
    #[default]
    InverseCondition,
}

impl Default for InvertConfig {
    fn default() -> Self {
        let d = IrgnmConfig::default();
        InvertConfig {
            diagonals: None,
            truth: None,
            interval: [0.9, 0.95],
            n_grid: 51,
            free_params: Vec::new(),
            alpha0: None,
            q: d.q_factor,
            tau: d.tau_discrepancy,
            max_outer: d.max_outer,
            weight_mode: WeightModeConfig::InverseCondition,
            smoothing_length: d.smoothing_length,
            fd_step: None,
        }
    }
}

impl InvertConfig {
    /// Solver settings; `noisy` picks the default free parameters.
    pub fn irgnm(&self, noisy: bool) -> Result<IrgnmConfig> {
        let free = if self.free_params.is_empty() {
            if noisy {
                vec![Param::Gamma]
            } else {
                Param::ALL.to_vec()
            }
        } else {
            self.free_params.iter().map(|s| Param::parse(s)).collect::<Result<Vec<_>>>()?
        };
        let cfg = IrgnmConfig {
            alpha0: self.alpha0,
            q_factor: self.q,
            max_outer: self.max_outer,
            tau_discrepancy: self.tau,
            fd_step: self.fd_step,
            weight_mode: match self.weight_mode {
                WeightModeConfig::Uniform => WeightMode::Uniform,
                WeightModeConfig::InverseCondition => WeightMode::InverseCondition,
            },
            free,
            smoothing_length: self.smoothing_length,
            ..IrgnmConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub frequency_mhz: f64,
    /// Height of R_o above the solar radius, m.
    pub height_m: f64,
    /// Scanned heights above the solar radius, m.
    pub range_m: [f64; 2],
    pub ell_max: usize,
    pub n_points: usize,
    pub threshold: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        let d = heliosolve::recover::ScanOptions::default();
        ScanConfig {
            frequency_mhz: 5.3,
            height_m: 105e3,
            range_m: [105e3, 155e3],
            ell_max: 250,
            n_points: d.n_points,
            threshold: d.threshold,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            log_level: LogLevel::Info,
            model: None,
            atmosphere: AtmosphereConfig::default(),
            sun: SunConfig::default(),
            observe: ObserveConfig::default(),
            radial: RadialConfig::default(),
            perturbation: None,
            invert: InvertConfig::default(),
            scan: ScanConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn atmosphere(&self) -> Atmosphere {
        Atmosphere {
            c0: self.atmosphere.c0,
            rho0: self.atmosphere.rho0,
            scale_height: self.atmosphere.h,
            interface_height: self.atmosphere.h_a,
            solar_radius: self.sun.radius,
        }
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.observe.frequencies_mhz.iter().map(|f| 2.0 * std::f64::consts::PI * f * 1e-3).collect()
    }

    /// Input files named by the config, in the order they are checked.
    /// The invert inputs only matter to the invert command.
    pub fn input_paths(&self, inverting: bool) -> Vec<&Path> {
        let inv = if inverting { [&self.invert.diagonals, &self.invert.truth] } else { [&None, &None] };
        std::iter::once(&self.model).chain(inv).flatten().map(|p| p.as_path()).collect()
    }

    /// Fails on the first named input file that does not exist.
    pub fn check_paths(&self, inverting: bool) -> Result<()> {
        for p in self.input_paths(inverting) {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
