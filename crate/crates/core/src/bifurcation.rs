//! Region classification of parameter space and two-parameter scans.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelParams, ParamError, RateName, ReproductionSet};
use crate::reproduction::{closed_form_reproduction, ReproductionError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BifurcationError {
    #[error("invalid axis: {0}")]
    InvalidAxis(String),
    #[error("cell ({row}, {col}) has invalid parameters: {source}")]
    InvalidCell {
        row: usize,
        col: usize,
        #[source]
        source: ParamError,
    },
    #[error(transparent)]
    Reproduction(#[from] ReproductionError),
}

/// Long-run behaviour class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Neither strain persists.
    I,
    /// Only the original strain persists.
    II,
    /// Only the emerging strain persists.
    III,
    /// Both strains persist.
    IV,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
            Region::IV => "IV",
        }
    }

    pub fn parse(s: &str) -> Option<Region> {
        match s {
            "I" => Some(Region::I),
            "II" => Some(Region::II),
            "III" => Some(Region::III),
            "IV" => Some(Region::IV),
            _ => None,
        }
    }

    /// Whether the original and emerging strains, respectively, persist.
    pub fn survivors(self) -> (bool, bool) {
        match self {
            Region::I => (false, false),
            Region::II => (true, false),
            Region::III => (false, true),
            Region::IV => (true, true),
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub region: Region,
    pub thresholds: ReproductionSet,
    /// Set when both strains can establish alone but neither can invade the
    /// other, so the label is decided by the larger basic number.
    pub contested: bool,
}

/// Assigns a region from the four thresholds. A value of exactly one counts
/// as "not above one".
pub fn classify_reproduction(rs: &ReproductionSet) -> RegionLabel {
    let above = |v: f64| v > 1.0;
    let (r1, r2, r12, r21) = (above(rs.r1), above(rs.r2), above(rs.r12), above(rs.r21));
    let mut contested = false;
    let region = if !r1 && !r2 {
        Region::I
    } else if r1 && r2 && r12 && r21 {
        Region::IV
    } else if r1 && r2 && !r12 && !r21 {
        contested = true;
        if rs.r1 >= rs.r2 {
            Region::II
        } else {
            Region::III
        }
    } else if r1 && (!r2 || !r21) {
        Region::II
    } else {
        Region::III
    };
    RegionLabel { region, thresholds: *rs, contested }
}

pub fn classify_region(p: &ModelParams) -> Result<RegionLabel, BifurcationError> {
    Ok(classify_reproduction(&closed_form_reproduction(p)?))
}

/// One scan axis: a rate parameter and its strictly increasing values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub name: RateName,
    pub values: Vec<f64>,
}

impl AxisSpec {
    /// `count` evenly spaced values from `lo` to `hi` inclusive.
    pub fn uniform(name: RateName, lo: f64, hi: f64, count: usize) -> Self {
        let values = match count {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..count)
                .map(|k| if k + 1 == count { hi } else { lo + (hi - lo) * k as f64 / (count - 1) as f64 })
                .collect(),
        };
        AxisSpec { name, values }
    }

    fn check(&self) -> Result<(), BifurcationError> {
        if self.values.is_empty() {
            return Err(BifurcationError::InvalidAxis(format!("{} has no values", self.name)));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(BifurcationError::InvalidAxis(format!("{} has non-finite values", self.name)));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(BifurcationError::InvalidAxis(format!("{} values are not strictly increasing", self.name)));
        }
        Ok(())
    }
}

/// Cell values over a two-parameter grid, stored row-major with `axis1`
/// indexing rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid<T> {
    pub axis1: AxisSpec,
    pub axis2: AxisSpec,
    pub fixed: ModelParams,
    pub cells: Vec<T>,
}

impl<T> ScanGrid<T> {
    pub fn cell(&self, row: usize, col: usize) -> &T {
        &self.cells[row * self.axis2.values.len() + col]
    }

    /// Parameters at a cell.
    pub fn params_at(&self, row: usize, col: usize) -> ModelParams {
        self.fixed
            .with(self.axis1.name, self.axis1.values[row])
            .with(self.axis2.name, self.axis2.values[col])
    }

    /// `(axis1 value, axis2 value, cell)` in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, &T)> + '_ {
        let width = self.axis2.values.len();
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, c)| (self.axis1.values[k / width], self.axis2.values[k % width], c))
    }
}

fn scan<T>(
    fixed: &ModelParams,
    axis1: &AxisSpec,
    axis2: &AxisSpec,
    mut eval: impl FnMut(&ModelParams) -> Result<T, BifurcationError>,
) -> Result<ScanGrid<T>, BifurcationError> {
    axis1.check()?;
    axis2.check()?;
    if axis1.name == axis2.name {
        return Err(BifurcationError::InvalidAxis(format!("both axes are {}", axis1.name)));
    }
    let mut cells = Vec::with_capacity(axis1.values.len() * axis2.values.len());
    for (row, &a) in axis1.values.iter().enumerate() {
        for (col, &b) in axis2.values.iter().enumerate() {
            let p = fixed
                .with(axis1.name, a)
                .with(axis2.name, b)
                .validate()
                .map_err(|source| BifurcationError::InvalidCell { row, col, source })?;
            cells.push(eval(&p)?);
        }
    }
    Ok(ScanGrid { axis1: axis1.clone(), axis2: axis2.clone(), fixed: *fixed, cells })
}

pub fn scan_regions(
    fixed: &ModelParams,
    axis1: &AxisSpec,
    axis2: &AxisSpec,
) -> Result<ScanGrid<RegionLabel>, BifurcationError> {
    scan(fixed, axis1, axis2, classify_region)
}

/// Invasion number shown by a scalar scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanQuantity {
    R12,
    R21,
}

pub fn scan_scalar(
    fixed: &ModelParams,
    axis1: &AxisSpec,
    axis2: &AxisSpec,
    quantity: ScanQuantity,
) -> Result<ScanGrid<f64>, BifurcationError> {
    scan(fixed, axis1, axis2, |p| {
        let rs = closed_form_reproduction(p)?;
        Ok(match quantity {
            ScanQuantity::R12 => rs.r12,
            ScanQuantity::R21 => rs.r21,
        })
    })
}
