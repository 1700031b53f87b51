//! Run configuration files.

use std::f64::consts::{PI, TAU};

use serde::Deserialize;

use adiascope::{
    CpScenario, DecompositionSettings, DriveKind, DriveScenario, IntegratorSettings,
    PulseRotation, QuadratureSpec, RunSettings, DEFAULT_GAMMA, DEFAULT_SEED,
};

use crate::CliError;

/// Top-level configuration file.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    /// Integrate the error factor directly as well and compare.
    #[serde(default)]
    pub cross_validate: bool,
    /// Samples of the modulation function.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Output path, overridden by `--out`.
    #[serde(default)]
    pub output: Option<String>,
}

fn default_samples() -> usize {
    513
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Cp(CpConfig),
    CpSweep(CpSweepConfig),
    Drive(DriveConfig),
    DriveSweep(DriveSweepConfig),
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RotationConfig {
    #[default]
    HalfTurn,
    FullTurn,
}

impl From<RotationConfig> for PulseRotation {
    fn from(r: RotationConfig) -> Self {
        match r {
            RotationConfig::HalfTurn => PulseRotation::HalfTurn,
            RotationConfig::FullTurn => PulseRotation::FullTurn,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CpConfig {
    pub theta: f64,
    #[serde(default)]
    pub phi_0: f64,
    #[serde(default = "full_circle")]
    pub phi_t: f64,
    pub n: usize,
    #[serde(default)]
    pub rotation: RotationConfig,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CpSweepConfig {
    pub theta: f64,
    #[serde(default)]
    pub phi_0: f64,
    #[serde(default = "full_circle")]
    pub phi_t: f64,
    pub n_min: usize,
    pub n_max: usize,
    #[serde(default)]
    pub rotation: RotationConfig,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DriveKindConfig {
    BPi,
    #[serde(rename = "b_2pi")]
    B2pi,
    BConst,
}

impl From<DriveKindConfig> for DriveKind {
    fn from(k: DriveKindConfig) -> Self {
        match k {
            DriveKindConfig::BPi => DriveKind::BPi,
            DriveKindConfig::B2pi => DriveKind::B2Pi,
            DriveKindConfig::BConst => DriveKind::BConst,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub drive: DriveKindConfig,
    /// `N' = Omega / 2 pi`.
    pub nprime: f64,
    pub theta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "full_circle")]
    pub omega: f64,
    #[serde(default = "unit_time")]
    pub t_total: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DriveSweepConfig {
    pub drives: Vec<DriveKindConfig>,
    pub nprime_start: f64,
    pub nprime_stop: f64,
    #[serde(default = "unit_step")]
    pub nprime_step: f64,
    pub theta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "full_circle")]
    pub omega: f64,
    #[serde(default = "unit_time")]
    pub t_total: f64,
}

fn full_circle() -> f64 {
    TAU
}

fn unit_time() -> f64 {
    1.0
}

fn unit_step() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub slices_per_period: usize,
    pub tolerance: f64,
    pub max_doublings: usize,
    pub path_steps: usize,
    pub cross_tolerance: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let i = IntegratorSettings::default();
        let d = DecompositionSettings::default();
        Self {
            slices_per_period: i.slices_per_period,
            tolerance: i.tolerance,
            max_doublings: i.max_doublings,
            path_steps: d.path_steps,
            cross_tolerance: d.cross_tolerance,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuadratureConfig {
    SphereGrid {
        #[serde(default = "default_polar")]
        polar: usize,
        #[serde(default = "default_azimuth")]
        azimuth: usize,
    },
    HaarMc {
        samples: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
}

fn default_polar() -> usize {
    64
}

fn default_azimuth() -> usize {
    128
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig::SphereGrid {
            polar: default_polar(),
            azimuth: default_azimuth(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let theta_ok = |t: f64| t.is_finite() && (0.0..=PI).contains(&t);
        match &self.scenario {
            ScenarioConfig::Cp(c) => {
                if !theta_ok(c.theta) {
                    return bad(format!("theta = {} must lie in [0, pi]", c.theta));
                }
                if c.n == 0 {
                    return bad("n must be at least 1".into());
                }
                check_span(c.phi_0, c.phi_t)?;
            }
            ScenarioConfig::CpSweep(c) => {
                if !theta_ok(c.theta) {
                    return bad(format!("theta = {} must lie in [0, pi]", c.theta));
                }
                if c.n_min == 0 || c.n_min > c.n_max {
                    return bad(format!("pulse range {}..={} is empty or starts at 0", c.n_min, c.n_max));
                }
                check_span(c.phi_0, c.phi_t)?;
            }
            ScenarioConfig::Drive(d) => {
                if !theta_ok(d.theta) {
                    return bad(format!("theta = {} must lie in [0, pi]", d.theta));
                }
                check_drive(d.nprime, d.gamma, d.omega, d.t_total)?;
            }
            ScenarioConfig::DriveSweep(d) => {
                if !theta_ok(d.theta) {
                    return bad(format!("theta = {} must lie in [0, pi]", d.theta));
                }
                if d.drives.is_empty() {
                    return bad("drives must list at least one kind".into());
                }
                if !(d.nprime_step > 0.0) || !(d.nprime_start <= d.nprime_stop) {
                    return bad(format!(
                        "N' range {}..={} step {} is empty",
                        d.nprime_start, d.nprime_stop, d.nprime_step
                    ));
                }
                check_drive(d.nprime_start, d.gamma, d.omega, d.t_total)?;
            }
        }
        let i = &self.integrator;
        if i.slices_per_period < 16 {
            return bad(format!("slices_per_period = {} is below 16", i.slices_per_period));
        }
        if i.path_steps == 0 {
            return bad("path_steps must be positive".into());
        }
        if !(i.tolerance > 0.0) || !(i.cross_tolerance > 0.0) {
            return bad("tolerances must be positive".into());
        }
        self.quadrature_spec(None)
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        Ok(())
    }

    /// Quadrature with an optional seed override.
    pub fn quadrature_spec(&self, seed: Option<u64>) -> QuadratureSpec {
        match self.quadrature {
            QuadratureConfig::SphereGrid { polar, azimuth } => QuadratureSpec::SphereGrid { polar, azimuth },
            QuadratureConfig::HaarMc { samples, seed: s } => QuadratureSpec::HaarMc {
                samples,
                seed: seed.unwrap_or(s),
            },
        }
    }

    pub fn run_settings(&self, seed: Option<u64>, tolerance: Option<f64>) -> RunSettings {
        let i = &self.integrator;
        RunSettings {
            integrator: IntegratorSettings {
                slices_per_period: i.slices_per_period,
                tolerance: i.tolerance,
                max_doublings: i.max_doublings,
            },
            decomposition: DecompositionSettings {
                path_steps: i.path_steps,
                tolerance: tolerance.unwrap_or(DecompositionSettings::default().tolerance),
                cross_validate: self.cross_validate,
                cross_tolerance: i.cross_tolerance,
            },
            quadrature: self.quadrature_spec(seed),
        }
    }
}

fn check_span(phi_0: f64, phi_t: f64) -> Result<(), CliError> {
    if !phi_0.is_finite() || !phi_t.is_finite() || phi_t < phi_0 {
        return Err(CliError::Config(format!("path [{phi_0}, {phi_t}] must be finite and ordered")));
    }
    Ok(())
}

fn check_drive(nprime: f64, gamma: f64, omega: f64, t_total: f64) -> Result<(), CliError> {
    if !(nprime > 0.0) || !nprime.is_finite() {
        return Err(CliError::Config(format!("N' = {nprime} must be positive")));
    }
    if !(t_total > 0.0) || !t_total.is_finite() {
        return Err(CliError::Config(format!("t_total = {t_total} must be positive")));
    }
    if !gamma.is_finite() || !omega.is_finite() {
        return Err(CliError::Config("gamma and omega must be finite".into()));
    }
    Ok(())
}

impl CpConfig {
    pub fn scenario(&self) -> CpScenario {
        CpScenario {
            theta: self.theta,
            phi_0: self.phi_0,
            phi_t: self.phi_t,
            n: self.n,
            rotation: self.rotation.into(),
        }
    }
}

impl DriveConfig {
    pub fn scenario(&self) -> DriveScenario {
        DriveScenario {
            kind: self.drive.into(),
            big_omega: TAU * self.nprime,
            gamma: self.gamma,
            theta: self.theta,
            omega: self.omega,
            t_total: self.t_total,
        }
    }
}

impl DriveSweepConfig {
    /// `N'` values from start to stop inclusive, tolerant to step rounding.
    pub fn nprimes(&self) -> Vec<f64> {
        let count = ((self.nprime_stop - self.nprime_start) / self.nprime_step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| self.nprime_start + self.nprime_step * k as f64)
            .collect()
    }
}
