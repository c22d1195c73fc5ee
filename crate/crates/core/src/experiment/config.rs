//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evolution::EvolveConfig;
use crate::params::ModelParams;
use crate::spectral::GridSpec;

/// Every accepted key, in the order [`ExperimentConfig::to_text`] writes them.
pub const KEYS: [&str; 19] = [
    "d",
    "s",
    "alpha",
    "omega",
    "L",
    "N",
    "dt0",
    "dt_min",
    "t_max",
    "lambda0",
    "R",
    "epsilon",
    "cfl_const",
    "diag_stride",
    "snapshot_stride",
    "deterministic",
    "output_dir",
    "blowup_hs_factor",
    "blowup_linf",
];

const REQUIRED: [&str; 4] = ["d", "s", "alpha", "omega"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfigErrorKind {
    MissingFile,
    Parse,
    UnknownKey,
    MissingKey,
    Range,
}

impl ConfigErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            ConfigErrorKind::MissingFile => "E_CONFIG_MISSING_FILE",
            ConfigErrorKind::Parse => "E_CONFIG_PARSE",
            ConfigErrorKind::UnknownKey => "E_CONFIG_UNKNOWN_KEY",
            ConfigErrorKind::MissingKey => "E_CONFIG_MISSING_KEY",
            ConfigErrorKind::Range => "E_CONFIG_RANGE",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub kind: ConfigErrorKind,
    pub message: String,
}

impl ConfigError {
    fn new(kind: ConfigErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.kind.code(), self.message)
    }
}

impl std::error::Error for ConfigError {}

type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub evolve: EvolveConfig,
    pub lambda0: f64,
    /// Radius of the truncated virial weight.
    pub radius: f64,
    pub epsilon: f64,
    pub output_dir: PathBuf,
    pub deterministic: bool,
}

/// Ordered `(key, value)` pairs as read from a file, before interpretation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: Vec<(String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> ConfigResult<Self> {
        let mut raw = RawConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::new(
                    ConfigErrorKind::Parse,
                    format!("line {}: expected `key = value`, found `{line}`", no + 1),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::new(ConfigErrorKind::Parse, format!("line {}: empty key or value", no + 1)));
            }
            if raw.get(key).is_some() {
                return Err(ConfigError::new(ConfigErrorKind::Parse, format!("line {}: duplicate key `{key}`", no + 1)));
            }
            raw.set(key, value)?;
        }
        Ok(raw)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Inserts or replaces `key`; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> ConfigResult<()> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::new(
                ConfigErrorKind::UnknownKey,
                format!("unknown key `{key}` (accepted: {})", KEYS.join(", ")),
            ));
        }
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string())),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> ConfigResult<()> {
        let Some((k, v)) = pair.split_once('=') else {
            return Err(ConfigError::new(ConfigErrorKind::Parse, format!("override `{pair}` is not of the form key=value")));
        };
        let (k, v) = (k.trim(), v.trim());
        if v.is_empty() {
            return Err(ConfigError::new(ConfigErrorKind::Parse, format!("override `{pair}` has an empty value")));
        }
        self.set(k, v)
    }

    fn number<T: std::str::FromStr>(&self, key: &str, default: T) -> ConfigResult<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError::new(ConfigErrorKind::Parse, format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn build(&self) -> ConfigResult<ExperimentConfig> {
        for key in REQUIRED {
            if self.get(key).is_none() {
                return Err(ConfigError::new(ConfigErrorKind::MissingKey, format!("required key `{key}` is missing")));
            }
        }
        let range = |e: crate::error::Error| ConfigError::new(ConfigErrorKind::Range, e.to_string());
        let dim: usize = self.number("d", 0)?;
        let s: f64 = self.number("s", 0.0)?;
        let alpha: f64 = self.number("alpha", 0.0)?;
        let omega: f64 = self.number("omega", 0.0)?;
        let params = ModelParams::new(dim, s, alpha, omega).map_err(range)?;
        let grid = GridSpec::new(dim, self.number("L", defaults::HALF_LENGTH)?, self.number("N", defaults::POINTS)?)
            .map_err(range)?;
        let base = EvolveConfig::default();
        let evolve = EvolveConfig {
            dt0: self.number("dt0", base.dt0)?,
            dt_min: self.number("dt_min", base.dt_min)?,
            t_max: self.number("t_max", base.t_max)?,
            blowup_hs_factor: self.number("blowup_hs_factor", base.blowup_hs_factor)?,
            blowup_linf: self.number("blowup_linf", base.blowup_linf)?,
            cfl_const: self.number("cfl_const", base.cfl_const)?,
            diag_stride: self.number("diag_stride", base.diag_stride)?,
            snapshot_stride: self.number("snapshot_stride", base.snapshot_stride)?,
        };
        evolve.validate().map_err(range)?;
        let deterministic = match self.get("deterministic") {
            None => true,
            Some("true") | Some("1") => true,
            Some("false") | Some("0") => false,
            Some(v) => {
                return Err(ConfigError::new(ConfigErrorKind::Parse, format!("`deterministic`: expected true or false, found `{v}`")))
            }
        };
        let cfg = ExperimentConfig {
            params,
            grid,
            evolve,
            lambda0: self.number("lambda0", defaults::LAMBDA0)?,
            radius: self.number("R", defaults::RADIUS)?,
            epsilon: self.number("epsilon", defaults::EPSILON)?,
            output_dir: PathBuf::from(self.get("output_dir").unwrap_or(defaults::OUTPUT_DIR)),
            deterministic,
        };
        cfg.check_ranges()?;
        Ok(cfg)
    }
}

pub mod defaults {
    pub const HALF_LENGTH: f64 = 20.0;
    pub const POINTS: usize = 256;
    pub const LAMBDA0: f64 = 1.1;
    pub const RADIUS: f64 = 2.0;
    pub const EPSILON: f64 = 0.01;
    pub const OUTPUT_DIR: &str = "out";
}

impl ExperimentConfig {
    fn check_ranges(&self) -> ConfigResult<()> {
        let positive = [("lambda0", self.lambda0), ("R", self.radius), ("epsilon", self.epsilon)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(ConfigErrorKind::Range, format!("{name} must be positive and finite (got {v})")));
            }
        }
        if self.params.in_theorem_regime() {
            let bound = self.epsilon_bound();
            if self.epsilon >= bound {
                return Err(ConfigError::new(
                    ConfigErrorKind::Range,
                    format!("epsilon = {} violates epsilon < (2s-1)alpha/(2s) = {bound}", self.epsilon),
                ));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(ConfigError::new(ConfigErrorKind::Range, "output_dir must not be empty"));
        }
        Ok(())
    }

    /// `(2s-1) alpha / (2s)`, the upper end of the admissible localized-virial exponent.
    pub fn epsilon_bound(&self) -> f64 {
        let p = &self.params;
        (2.0 * p.s - 1.0) * p.alpha / (2.0 * p.s)
    }

    /// Loads `path` and applies `overrides` (`key=value`) on top.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> ConfigResult<Self> {
        let mut raw = read_raw(path)?;
        for o in overrides {
            raw.set_pair(o)?;
        }
        raw.build()
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let e = &self.evolve;
        let values: [String; 19] = [
            p.dim.to_string(),
            p.s.to_string(),
            p.alpha.to_string(),
            p.omega.to_string(),
            self.grid.half_length.to_string(),
            self.grid.points.to_string(),
            e.dt0.to_string(),
            e.dt_min.to_string(),
            e.t_max.to_string(),
            self.lambda0.to_string(),
            self.radius.to_string(),
            self.epsilon.to_string(),
            e.cfl_const.to_string(),
            e.diag_stride.to_string(),
            e.snapshot_stride.to_string(),
            self.deterministic.to_string(),
            self.output_dir.display().to_string(),
            e.blowup_hs_factor.to_string(),
            e.blowup_linf.to_string(),
        ];
        KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn read_raw(path: &Path) -> ConfigResult<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        let kind = if e.kind() == std::io::ErrorKind::NotFound { ConfigErrorKind::MissingFile } else { ConfigErrorKind::Parse };
        ConfigError::new(kind, format!("{}: {e}", path.display()))
    })?;
    RawConfig::parse(&text)
}

pub fn load_config(path: &Path) -> ConfigResult<ExperimentConfig> {
    read_raw(path)?.build()
}

pub fn parse_config(text: &str) -> ConfigResult<ExperimentConfig> {
    RawConfig::parse(text)?.build()
}
