use std::path::{Path, PathBuf};

use gmi_core::classical::{lift_periodic, FunctionalSpec, PeriodicFunctionalSpec};
use gmi_core::increments::{FMIncrementSpec, GMIncrementSpec};
use gmi_core::minimax::{DensityClassSpec, MinimaxOptions};
use gmi_core::oracle::DEFAULT_SCHEDULE;
use gmi_core::spectra::DensityModel;
use gmi_core::{GmiError, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_GRID: usize = 1 << 10;
pub const MAX_GRID: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncrementConfig {
    Gm(GMIncrementSpec),
    Fm(FMIncrementSpec),
}

impl IncrementConfig {
    /// Integer-order operator used by the interpolation problem.
    pub fn gm(&self) -> Result<GMIncrementSpec> {
        match self {
            IncrementConfig::Gm(s) => Ok(s.clone()),
            IncrementConfig::Fm(s) => s.integer_part(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalConfig {
    Vector(FunctionalSpec),
    Periodic(PeriodicFunctionalSpec),
}

impl FunctionalConfig {
    pub fn resolve(&self) -> Result<FunctionalSpec> {
        match self {
            FunctionalConfig::Vector(f) => Ok(f.clone()),
            FunctionalConfig::Periodic(p) => lift_periodic(&PeriodicFunctionalSpec::new(p.period, p.a.clone())?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_schedule")]
    pub schedule: Vec<usize>,
    /// Largest accepted relative gap at the last window.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { schedule: default_schedule(), tolerance: default_tolerance() }
    }
}

fn default_schedule() -> Vec<usize> {
    DEFAULT_SCHEDULE.to_vec()
}

fn default_tolerance() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimaxConfig {
    pub class: DensityClassSpec,
    #[serde(default)]
    pub options: MinimaxOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffsConfig {
    /// Highest index of the inverse and fractional series.
    #[serde(default = "default_length")]
    pub length: usize,
}

impl Default for CoeffsConfig {
    fn default() -> Self {
        Self { length: default_length() }
    }
}

fn default_length() -> usize {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub increment: IncrementConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<DensityModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<DensityModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalConfig>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimax: Option<MinimaxConfig>,
    #[serde(default)]
    pub coeffs: CoeffsConfig,
}

fn default_grid() -> usize {
    1 << 12
}

/// Makes relative `grid` density paths relative to `base`.
fn resolve_paths(v: &mut Value, base: &Path) {
    match v {
        Value::Object(map) => {
            if map.get("kind").and_then(Value::as_str) == Some("grid") {
                if let Some(Value::String(p)) = map.get_mut("path") {
                    let path = PathBuf::from(&*p);
                    if path.is_relative() {
                        *p = base.join(path).to_string_lossy().into_owned();
                    }
                }
            }
            map.values_mut().for_each(|x| resolve_paths(x, base));
        }
        Value::Array(items) => items.iter_mut().for_each(|x| resolve_paths(x, base)),
        _ => {}
    }
}

impl RunConfig {
    pub fn from_str(text: &str, base: &Path) -> Result<Self> {
        let mut v: Value = serde_json::from_str(text)?;
        resolve_paths(&mut v, base);
        let cfg: RunConfig = serde_json::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(GmiError::InvalidInput(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        validate_grid(self.grid)?;
        if self.oracle.schedule.is_empty() || self.oracle.schedule.contains(&0) {
            return Err(GmiError::InvalidInput("oracle schedule must list positive half-lengths".into()));
        }
        if !(self.oracle.tolerance > 0.0) {
            return Err(GmiError::InvalidInput("oracle tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn require_functional(&self) -> Result<FunctionalSpec> {
        self.functional
            .as_ref()
            .ok_or_else(|| GmiError::InvalidInput("config lacks a functional".into()))?
            .resolve()
    }
}

pub fn validate_grid(n: usize) -> Result<()> {
    if !n.is_power_of_two() || !(MIN_GRID..=MAX_GRID).contains(&n) {
        return Err(GmiError::InvalidInput(format!(
            "grid size {n} must be a power of two in [{MIN_GRID}, {MAX_GRID}]"
        )));
    }
    Ok(())
}
