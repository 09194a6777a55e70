//! CSV and JSON output files and the loaders that read the CSVs back.
//!
//! Every CSV has a header row and may start with `#` comment lines. Floats
//! are written in shortest round-trip form, so loading a file gives back the
//! exact values that were written.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;
use twostrain_core::bifurcation::Region;
use twostrain_core::data::DataError;
use twostrain_core::phase::{FieldSample, NullclineKind};
use twostrain_core::{FullState, ReducedState};

use crate::error::CliError;

pub const TRAJECTORY_FULL_HEADER: [&str; 6] = ["t", "S", "I1", "R1", "I2", "R2"];
pub const TRAJECTORY_REDUCED_HEADER: [&str; 4] = ["t", "I2", "R2", "omega"];
pub const NULLCLINE_HEADER: [&str; 3] = ["which", "I2", "R2"];
pub const FIELD_HEADER: [&str; 4] = ["I2", "R2", "dI2", "dR2"];
pub const SWITCHING_LINE_HEADER: [&str; 3] = ["end", "I2", "R2"];
pub const SCAN_HEADER: [&str; 3] = ["axis1", "axis2", "value"];
pub const FIT_HEADER: [&str; 5] = ["window", "x", "x_hat", "y", "y_hat"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullTrajectoryRow {
    pub t: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "I1")]
    pub i1: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
}

impl FullTrajectoryRow {
    pub fn new(t: f64, x: &FullState) -> Self {
        FullTrajectoryRow { t, s: x.s, i1: x.i1, r1: x.r1, i2: x.i2, r2: x.r2 }
    }

    pub fn state(&self) -> FullState {
        FullState { s: self.s, i1: self.i1, r1: self.r1, i2: self.i2, r2: self.r2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedTrajectoryRow {
    pub t: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    pub omega: f64,
}

impl ReducedTrajectoryRow {
    pub fn state(&self) -> ReducedState {
        ReducedState { i2: self.i2, r2: self.r2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullclineRow {
    pub which: NullclineKind,
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "dI2")]
    pub d_i2: f64,
    #[serde(rename = "dR2")]
    pub d_r2: f64,
}

impl From<&FieldSample> for FieldRow {
    fn from(s: &FieldSample) -> Self {
        FieldRow { i2: s.point.i2, r2: s.point.r2, d_i2: s.derivative.i2, d_r2: s.derivative.r2 }
    }
}

/// Which end of the switching-line segment a row holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineEnd {
    Start,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingLineRow {
    pub end: LineEnd,
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow<T> {
    pub axis1: f64,
    pub axis2: f64,
    pub value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    /// Last day of the 14-day window.
    pub window: NaiveDate,
    pub x: f64,
    pub x_hat: f64,
    pub y: f64,
    pub y_hat: f64,
}

/// Where and how output files are written.
#[derive(Debug, Clone)]
pub struct OutputDir {
    dir: PathBuf,
    /// Content of the leading comment line, when not reproducible.
    stamp: Option<String>,
}

impl OutputDir {
    /// Creates the directory if needed. With `reproducible` unset every file
    /// carries the current UTC time.
    pub fn create(dir: &Path, reproducible: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
        let stamp = (!reproducible).then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
        Ok(OutputDir { dir: dir.to_path_buf(), stamp })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn stamp(&self) -> Option<&str> {
        self.stamp.as_deref()
    }

    /// Writes a headered CSV of `rows` atomically.
    pub fn write_csv<T: Serialize>(&self, name: &str, header: &[&str], rows: &[T]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut bytes = Vec::new();
        if let Some(stamp) = &self.stamp {
            writeln!(bytes, "# generated {stamp}").expect("writing to memory");
        }
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(bytes);
        let encode = |e: csv::Error| CliError::output(&path, std::io::Error::other(e));
        wtr.write_record(header).map_err(encode)?;
        for row in rows {
            wtr.serialize(row).map_err(encode)?;
        }
        let bytes = wtr.into_inner().map_err(|e| CliError::output(&path, e.into_error()))?;
        self.write_atomic(&path, &bytes)?;
        Ok(path)
    }

    /// Writes pretty-printed JSON atomically, with a `generated` field when
    /// not reproducible.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut json = serde_json::to_value(value).map_err(|e| CliError::output(&path, e.into()))?;
        if let (Some(stamp), Some(map)) = (&self.stamp, json.as_object_mut()) {
            map.insert("generated".into(), stamp.clone().into());
        }
        let mut bytes = serde_json::to_vec_pretty(&json).map_err(|e| CliError::output(&path, e.into()))?;
        bytes.push(b'\n');
        self.write_atomic(&path, &bytes)?;
        Ok(path)
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        let mut tmp = NamedTempFile::new_in(&self.dir).map_err(|e| CliError::output(path, e))?;
        tmp.write_all(bytes).map_err(|e| CliError::output(path, e))?;
        tmp.persist(path).map_err(|e| CliError::output(path, e.error))?;
        Ok(())
    }
}

/// Reads all rows of a headered CSV, checking the header exactly.
pub fn read_rows<R: Read, T: DeserializeOwned>(input: R, header: &[&str]) -> Result<Vec<T>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let found = rdr.headers().map_err(csv_error)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(DataError::ParseError {
            line: found.position().map_or(1, |p| p.line()),
            message: format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    rdr.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(err: csv::Error) -> DataError {
    let line = err.position().map_or(0, |p| p.line());
    DataError::ParseError { line, message: err.to_string() }
}

fn read_file<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    read_rows(file, header)
}

pub fn load_full_trajectory(path: &Path) -> Result<Vec<FullTrajectoryRow>, DataError> {
    read_file(path, &TRAJECTORY_FULL_HEADER)
}

pub fn load_reduced_trajectory(path: &Path) -> Result<Vec<ReducedTrajectoryRow>, DataError> {
    read_file(path, &TRAJECTORY_REDUCED_HEADER)
}

pub fn load_nullclines(path: &Path) -> Result<Vec<NullclineRow>, DataError> {
    read_file(path, &NULLCLINE_HEADER)
}

pub fn load_field(path: &Path) -> Result<Vec<FieldRow>, DataError> {
    read_file(path, &FIELD_HEADER)
}

pub fn load_switching_line(path: &Path) -> Result<Vec<SwitchingLineRow>, DataError> {
    read_file(path, &SWITCHING_LINE_HEADER)
}

pub fn load_region_scan(path: &Path) -> Result<Vec<ScanRow<Region>>, DataError> {
    read_file(path, &SCAN_HEADER)
}

pub fn load_scalar_scan(path: &Path) -> Result<Vec<ScanRow<f64>>, DataError> {
    read_file(path, &SCAN_HEADER)
}

pub fn load_fit_table(path: &Path) -> Result<Vec<FitRow>, DataError> {
    read_file(path, &FIT_HEADER)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn awkward_floats_survive_a_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path(), false).unwrap();
        let values = [0.1 + 0.2, 1e-300, 123_456_789.123_456_78, f64::MIN_POSITIVE, -0.0, 2.0 / 3.0];
        let rows: Vec<FieldRow> = values.iter().map(|&v| FieldRow { i2: v, r2: -v, d_i2: v * 7.0, d_r2: v / 3.0 }).collect();
        let path = out.write_csv("field.csv", &FIELD_HEADER, &rows).unwrap();
        assert_eq!(load_field(&path).unwrap(), rows);
    }

    #[test]
    fn stamp_line_only_when_not_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [SwitchingLineRow { end: LineEnd::Start, i2: 1.0, r2: 0.0 }];
        let stamped = OutputDir::create(dir.path(), false).unwrap().write_csv("a.csv", &SWITCHING_LINE_HEADER, &rows).unwrap();
        let plain = OutputDir::create(dir.path(), true).unwrap().write_csv("b.csv", &SWITCHING_LINE_HEADER, &rows).unwrap();
        assert!(std::fs::read_to_string(stamped).unwrap().starts_with("# generated "));
        assert_eq!(std::fs::read_to_string(plain).unwrap(), "end,I2,R2\nstart,1.0,0.0\n");
    }

    #[test]
    fn wrong_header_is_reported() {
        let err = read_rows::<_, FieldRow>("I2,R2,dI2\n1,2,3\n".as_bytes(), &FIELD_HEADER).unwrap_err();
        assert!(matches!(err, DataError::ParseError { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn regions_are_written_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path(), true).unwrap();
        let rows = [ScanRow { axis1: 0.0, axis2: 0.5, value: Region::III }];
        let path = out.write_csv("scan.csv", &SCAN_HEADER, &rows).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "axis1,axis2,value\n0.0,0.5,III\n");
        assert_eq!(load_region_scan(&path).unwrap(), rows);
    }

    #[test]
    fn json_carries_stamp_unless_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let value = serde_json::json!({ "a": 1 });
        let path = OutputDir::create(dir.path(), true).unwrap().write_json("r.json", &value).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "{\n  \"a\": 1\n}\n");
        let path = OutputDir::create(dir.path(), false).unwrap().write_json("s.json", &value).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().contains("\"generated\""));
    }
}
