//! Run configuration: one TOML section per subcommand, overridden by flags.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

use cylflow::Truncation;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: {message}")]
    Field {
        field: &'static str,
        message: String,
    },

    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
}

fn bad(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

fn check_trunc(naxis: usize, ny: usize, m_omega: usize) -> Result<(), ConfigError> {
    if !(1..=2).contains(&naxis) {
        return Err(bad(
            "naxis",
            format!("supported axis counts are 1 and 2, got {naxis}"),
        ));
    }
    if ny < 4 {
        return Err(bad(
            "ny",
            format!("need at least degree 4 to hold every zero mode, got {ny}"),
        ));
    }
    if m_omega < 2 {
        return Err(bad(
            "m_omega",
            format!("need angular frequency 2 or more, got {m_omega}"),
        ));
    }
    Ok(())
}

macro_rules! truncation_accessor {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn truncation(&self) -> Truncation {
                Truncation::new(self.naxis, self.ny, self.m_omega)
            }
        }
    )*};
}

truncation_accessor!(SpectrumConfig, ManifoldConfig, SimulateConfig, VerifyConfig);

fn check_delta(delta: f64) -> Result<(), ConfigError> {
    if !(delta > 0.0 && delta < 0.125) {
        return Err(bad("delta", format!("must lie in (0, 1/8), got {delta}")));
    }
    Ok(())
}

fn check_a0(a0: Option<f64>, delta: f64) -> Result<(), ConfigError> {
    if let Some(a0) = a0 {
        if !(a0 >= 0.5 + delta && a0 <= 0.5 + 2.0 * delta) {
            return Err(bad(
                "a0",
                format!(
                    "must lie in [1/2 + delta, 1/2 + 2 delta] = [{}, {}], got {a0}",
                    0.5 + delta,
                    0.5 + 2.0 * delta
                ),
            ));
        }
    }
    Ok(())
}

fn check_grid(dt: f64, tau_max: f64) -> Result<(), ConfigError> {
    if !(dt > 0.0) {
        return Err(bad("dt", format!("must be positive, got {dt}")));
    }
    if !(tau_max > 0.0) {
        return Err(bad("tau_max", format!("must be positive, got {tau_max}")));
    }
    if cylflow::integrator::UniformGrid::new(dt, tau_max).is_err() {
        return Err(bad(
            "tau_max",
            format!("must be a multiple of dt = {dt} with at least 6 steps, got {tau_max}"),
        ));
    }
    Ok(())
}

fn check_s(s: usize) -> Result<(), ConfigError> {
    if s < 2 {
        return Err(bad(
            "s",
            format!("regularity index must be at least 2, got {s}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub a: f64,
    pub naxis: usize,
    pub ny: usize,
    pub m_omega: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            a: 0.5,
            naxis: 1,
            ny: 24,
            m_omega: 8,
        }
    }
}

impl SpectrumConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(bad("a", format!("weight must be positive, got {}", self.a)));
        }
        check_trunc(self.naxis, self.ny, self.m_omega)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldConfig {
    pub delta: f64,
    /// Initial weight; `1/2 + 2δ` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    pub naxis: usize,
    pub ny: usize,
    pub m_omega: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub dt: f64,
    pub tau_max: f64,
    pub c0: f64,
    pub c: f64,
    pub s: usize,
    /// Seeds drawn before giving up when fixed points leave the graph.
    pub max_draws: usize,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            delta: 0.01,
            a0: None,
            naxis: 1,
            ny: 24,
            m_omega: 8,
            seed: 42,
            tol: 1e-9,
            max_iter: 40,
            dt: 0.01,
            tau_max: 40.0,
            c0: 10.0,
            c: 1.0,
            s: 2,
            max_draws: 8,
        }
    }
}

impl ManifoldConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_delta(self.delta)?;
        check_a0(self.a0, self.delta)?;
        check_trunc(self.naxis, self.ny, self.m_omega)?;
        if !(self.tol > 0.0) {
            return Err(bad("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(bad("max_iter", "must be at least 1"));
        }
        check_grid(self.dt, self.tau_max)?;
        if !(self.c0 > 0.0) {
            return Err(bad("c0", format!("must be positive, got {}", self.c0)));
        }
        if !(self.c > 0.0) {
            return Err(bad("c", format!("must be positive, got {}", self.c)));
        }
        check_s(self.s)?;
        if self.max_draws == 0 {
            return Err(bad("max_draws", "must be at least 1"));
        }
        Ok(())
    }

    pub fn a0(&self) -> f64 {
        self.a0
            .unwrap_or_else(|| cylflow::stable_manifold::default_a0(self.delta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    pub naxis: usize,
    pub ny: usize,
    pub m_omega: usize,
    pub seed: u64,
    pub dt: f64,
    pub tau_max: f64,
    pub s: usize,
    /// Frozen path (JSON written by `manifold`); the static path when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Write a field snapshot every this many grid steps; 0 disables.
    pub snapshot_every: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            delta: 0.01,
            a0: None,
            naxis: 1,
            ny: 24,
            m_omega: 8,
            seed: 42,
            dt: 0.01,
            tau_max: 40.0,
            s: 2,
            path: None,
            snapshot_every: 0,
        }
    }
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_delta(self.delta)?;
        check_a0(self.a0, self.delta)?;
        check_trunc(self.naxis, self.ny, self.m_omega)?;
        check_grid(self.dt, self.tau_max)?;
        check_s(self.s)?;
        if let Some(p) = &self.path {
            if !p.is_file() {
                return Err(bad("path", format!("no such file: {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn a0(&self) -> f64 {
        self.a0
            .unwrap_or_else(|| cylflow::stable_manifold::default_a0(self.delta))
    }
}

/// Invariant suites of `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Nonlinearity,
    Interpolation,
    Orthogonality,
    Decay,
    Calibrate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub suite: Suite,
    pub delta: f64,
    pub naxis: usize,
    pub ny: usize,
    pub m_omega: usize,
    pub seed: u64,
    /// Random samples per check.
    pub samples: usize,
    /// `‖ξ‖_s` of the perturbations probed by the nonlinearity suite; 0 probes the cylinder itself.
    pub amplitude: f64,
    pub s: usize,
    /// Path to fit in the decay suite; a fresh fixed point when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suite: Suite::Nonlinearity,
            delta: 0.01,
            naxis: 1,
            ny: 24,
            m_omega: 8,
            seed: 42,
            samples: 5,
            amplitude: 0.05,
            s: 2,
            path: None,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_delta(self.delta)?;
        check_trunc(self.naxis, self.ny, self.m_omega)?;
        if self.samples == 0 {
            return Err(bad("samples", "must be at least 1"));
        }
        if !(self.amplitude >= 0.0 && self.amplitude < 0.5) {
            return Err(bad(
                "amplitude",
                format!("must lie in [0, 1/2), got {}", self.amplitude),
            ));
        }
        check_s(self.s)?;
        if let Some(p) = &self.path {
            if !p.is_file() {
                return Err(bad("path", format!("no such file: {}", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Rescaled path (JSON written by `manifold` or `simulate`).
    pub path: PathBuf,
    /// Singular time `T`.
    pub t_final: f64,
    /// Physical sample times in `[0, T)`.
    pub times: Vec<f64>,
    /// Axial sample range `[-y_max, y_max]` in rescaled units.
    pub y_max: f64,
    pub y_points: usize,
    pub theta_points: usize,
    /// Clock resolution on `[0, T)`.
    pub steps: usize,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("path.json"),
            t_final: 1.0,
            times: vec![0.0, 0.5, 0.9, 0.99],
            y_max: 3.0,
            y_points: 13,
            theta_points: 16,
            steps: 4000,
        }
    }
}

impl ReconstructConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.path.is_file() {
            return Err(bad(
                "path",
                format!("no such file: {}", self.path.display()),
            ));
        }
        if !(self.t_final > 0.0) {
            return Err(bad(
                "t_final",
                format!("must be positive, got {}", self.t_final),
            ));
        }
        if self.times.is_empty() {
            return Err(bad("times", "need at least one sample time"));
        }
        if let Some(t) = self
            .times
            .iter()
            .find(|t| !(**t >= 0.0 && **t < self.t_final))
        {
            return Err(bad(
                "times",
                format!("{t} is outside [0, {})", self.t_final),
            ));
        }
        if !(self.y_max >= 0.0) {
            return Err(bad(
                "y_max",
                format!("must be non-negative, got {}", self.y_max),
            ));
        }
        if self.y_points == 0 {
            return Err(bad("y_points", "must be at least 1"));
        }
        if self.theta_points == 0 {
            return Err(bad("theta_points", "must be at least 1"));
        }
        if self.steps < 6 {
            return Err(bad(
                "steps",
                format!("must be at least 6, got {}", self.steps),
            ));
        }
        Ok(())
    }
}

/// The whole config file; every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub spectrum: SpectrumConfig,
    pub simulate: SimulateConfig,
    pub manifold: ManifoldConfig,
    pub verify: VerifyConfig,
    pub reconstruct: ReconstructConfig,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Read { message, .. } => ConfigError::Read {
                path: path.to_owned(),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Read {
            path: PathBuf::new(),
            message: e.to_string(),
        })
    }
}

/// Serialises one section under its table name, in the file format.
pub fn section_toml<T: Serialize>(name: &str, value: &T) -> String {
    let mut table = toml::Table::new();
    table.insert(
        name.to_string(),
        toml::Value::try_from(value).expect("config sections serialise"),
    );
    toml::to_string(&table).expect("config sections serialise")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_round_trip() {
        let mut file = ConfigFile::default();
        file.manifold.a0 = Some(0.515);
        file.manifold.naxis = 2;
        file.verify.suite = Suite::Decay;
        file.simulate.path = Some(PathBuf::from("runs/path.json"));
        file.reconstruct.times = vec![0.0, 0.25, 0.75];
        let text = toml::to_string(&file).unwrap();
        assert_eq!(ConfigFile::parse(&text).unwrap(), file);
        let one = section_toml("manifold", &file.manifold);
        assert_eq!(ConfigFile::parse(&one).unwrap().manifold, file.manifold);
    }

    #[test]
    fn missing_keys_take_defaults() {
        let f = ConfigFile::parse("[manifold]\ndelta = 0.005\n").unwrap();
        assert_eq!(f.manifold.delta, 0.005);
        assert_eq!(f.manifold.seed, 42);
        assert_eq!(f.spectrum, SpectrumConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigFile::parse("[manifold]\ndelt = 0.01\n").is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let c = ManifoldConfig {
            delta: 0.2,
            ..Default::default()
        };
        assert!(matches!(
            c.validate(),
            Err(ConfigError::Field { field: "delta", .. })
        ));
        let c = ManifoldConfig {
            a0: Some(0.6),
            ..Default::default()
        };
        assert!(matches!(
            c.validate(),
            Err(ConfigError::Field { field: "a0", .. })
        ));
        let c = ManifoldConfig {
            tau_max: 40.005,
            ..Default::default()
        };
        assert!(matches!(
            c.validate(),
            Err(ConfigError::Field {
                field: "tau_max",
                ..
            })
        ));
        let c = SpectrumConfig {
            naxis: 3,
            ..Default::default()
        };
        assert!(matches!(
            c.validate(),
            Err(ConfigError::Field { field: "naxis", .. })
        ));
    }
}
