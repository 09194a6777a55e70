//! TOML run configuration.
//!
//! One file holds a `[params]` table shared by every command plus one
//! optional section per command. Unknown keys are rejected. Relative data
//! paths are resolved against the directory of the config file and must
//! exist when the file is loaded.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use twostrain_core::bifurcation::{AxisSpec, ScanQuantity};
use twostrain_core::dynamics::{ModelKind, DEFAULT_STEP};
use twostrain_core::fitting::{FitSpec, Theta};
use twostrain_core::{ModelParams, RateName};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: Option<ModelParams>,
    pub simulate: Option<SimulateConfig>,
    pub phase: Option<PhaseConfig>,
    pub scan: Option<ScanConfig>,
    pub fit: Option<FitConfig>,
}

/// Initial infections. `S` is whatever remains of `N`.
///
/// For the full model, leaving out both `i1` and `r1` starts the original
/// strain at its quasi-steady level for the given `(i2, r2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub i1: Option<f64>,
    pub r1: Option<f64>,
    pub i2: f64,
    #[serde(default)]
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelKind,
    pub t_end: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    pub initial: InitialConfig,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    /// `I2` columns at which each nullcline is solved, spanning `[0, N]`.
    #[serde(default = "default_nullcline_points")]
    pub nullcline_points: usize,
    /// Vector-field samples per axis.
    #[serde(default = "default_field_points")]
    pub field_points: usize,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig { nullcline_points: default_nullcline_points(), field_points: default_field_points() }
    }
}

fn default_nullcline_points() -> usize {
    101
}

fn default_field_points() -> usize {
    21
}

/// A scan axis as `lo..=hi` in `count` evenly spaced values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub name: RateName,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl AxisConfig {
    pub fn to_spec(self) -> Result<AxisSpec, CliError> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.count == 0 || (self.count > 1 && self.hi <= self.lo) {
            return Err(CliError::Config(format!(
                "axis {}: need finite lo < hi and count >= 1 (got {}..{}, {})",
                self.name.as_str(),
                self.lo,
                self.hi,
                self.count
            )));
        }
        Ok(AxisSpec::uniform(self.name, self.lo, self.hi, self.count))
    }
}

/// What each scan cell holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanValue {
    Region,
    R12,
    R21,
}

impl ScanValue {
    pub fn scalar(self) -> Option<ScanQuantity> {
        match self {
            ScanValue::Region => None,
            ScanValue::R12 => Some(ScanQuantity::R12),
            ScanValue::R21 => Some(ScanQuantity::R21),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub axis1: AxisConfig,
    pub axis2: AxisConfig,
    #[serde(default = "default_scan_value")]
    pub value: ScanValue,
}

fn default_scan_value() -> ScanValue {
    ScanValue::Region
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub case_data: PathBuf,
    pub variant_shares: PathBuf,
    /// Only share windows ending on or after this day are fitted.
    #[serde(default, deserialize_with = "optional_date")]
    pub start: Option<NaiveDate>,
    /// Only share windows ending on or before this day are fitted.
    #[serde(default, deserialize_with = "optional_date")]
    pub end: Option<NaiveDate>,
    pub spec: FitSpec,
    pub initial_guess: Theta,
}

/// Accepts a TOML local date (`2021-06-14`) or the same text quoted.
fn optional_date<'de, D: serde::Deserializer<'de>>(de: D) -> Result<Option<NaiveDate>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Toml(toml::value::Datetime),
        Text(String),
    }
    let text = match Raw::deserialize(de)? {
        Raw::Toml(d) => d.to_string(),
        Raw::Text(s) => s,
    };
    text.parse().map(Some).map_err(|e| serde::de::Error::custom(format!("invalid date `{text}`: {e}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads, parses and checks a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base)?;
        if let Some(p) = config.params {
            p.validate()?;
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) -> Result<(), CliError> {
        if let Some(fit) = &mut self.fit {
            for file in [&mut fit.case_data, &mut fit.variant_shares] {
                if file.is_relative() {
                    *file = base.join(&*file);
                }
                if !file.is_file() {
                    return Err(CliError::Config(format!("referenced file {} does not exist", file.display())));
                }
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        self.params.ok_or_else(|| missing("params"))
    }
}

/// Error for a command whose section is absent.
pub fn missing(section: &str) -> CliError {
    CliError::Config(format!("config has no [{section}] section"))
}
