//! Loaders for dated case counts and emerging-variant shares.
//!
//! Both files are headered CSV. Lines starting with `#` are comments.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Days between consecutive share windows.
pub const SHARE_SPACING_DAYS: i64 = 14;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("line {line}: date {date} does not follow the previous date")]
    NonMonotoneDates { line: u64, date: NaiveDate },
    #[error("line {line}: negative case count {value}")]
    NegativeCases { line: u64, value: f64 },
    #[error("line {line}: share {value} is outside [0, 1]")]
    ShareOutOfRange { line: u64, value: f64 },
    #[error("line {line}: window end {date} is not {SHARE_SPACING_DAYS} days after the previous one")]
    ShareSpacing { line: u64, date: NaiveDate },
}

/// Daily new-case counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDataFile {
    pub dates: Vec<NaiveDate>,
    pub new_cases: Vec<f64>,
}

/// Emerging-variant share per 14-day window, keyed by the window's last day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantShareFile {
    pub window_end_dates: Vec<NaiveDate>,
    pub emerging_share: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct CaseRow {
    date: NaiveDate,
    new_cases: f64,
}

#[derive(Debug, Deserialize)]
struct ShareRow {
    window_end_date: NaiveDate,
    emerging_share: f64,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn parse_error(err: csv::Error) -> DataError {
    let line = err.position().map_or(0, |p| p.line());
    DataError::ParseError { line, message: err.to_string() }
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

/// Deserializes every record of a headered CSV together with its line number.
fn rows<R: Read, T: serde::de::DeserializeOwned>(
    input: R,
    expected_header: &[&str],
) -> Result<Vec<(u64, T)>, DataError> {
    let mut rdr = reader(input);
    check_header(&mut rdr, expected_header)?;
    let header = rdr.headers().map_err(parse_error)?.clone();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(parse_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .deserialize(Some(&header))
            .map_err(|e| DataError::ParseError { line, message: e.to_string() })?;
        out.push((line, row));
    }
    Ok(out)
}

/// Parses a `date,new_cases` CSV. Dates must be strictly increasing and
/// counts non-negative.
pub fn parse_case_data<R: Read>(input: R) -> Result<CaseDataFile, DataError> {
    let mut out = CaseDataFile { dates: Vec::new(), new_cases: Vec::new() };
    for (line, row) in rows::<_, CaseRow>(input, &["date", "new_cases"])? {
        if !row.new_cases.is_finite() {
            return Err(DataError::ParseError { line, message: "case count is not finite".into() });
        }
        if row.new_cases < 0.0 {
            return Err(DataError::NegativeCases { line, value: row.new_cases });
        }
        if out.dates.last().is_some_and(|&prev| row.date <= prev) {
            return Err(DataError::NonMonotoneDates { line, date: row.date });
        }
        out.dates.push(row.date);
        out.new_cases.push(row.new_cases);
    }
    Ok(out)
}

/// Parses a `window_end_date,emerging_share` CSV. Shares must lie in
/// `[0, 1]` and window ends must be exactly 14 days apart.
pub fn parse_variant_shares<R: Read>(input: R) -> Result<VariantShareFile, DataError> {
    let mut out = VariantShareFile { window_end_dates: Vec::new(), emerging_share: Vec::new() };
    for (line, row) in rows::<_, ShareRow>(input, &["window_end_date", "emerging_share"])? {
        if !(0.0..=1.0).contains(&row.emerging_share) {
            return Err(DataError::ShareOutOfRange { line, value: row.emerging_share });
        }
        if let Some(&prev) = out.window_end_dates.last() {
            if (row.window_end_date - prev).num_days() != SHARE_SPACING_DAYS {
                return Err(DataError::ShareSpacing { line, date: row.window_end_date });
            }
        }
        out.window_end_dates.push(row.window_end_date);
        out.emerging_share.push(row.emerging_share);
    }
    Ok(out)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), DataError> {
    let header = rdr.headers().map_err(parse_error)?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(DataError::ParseError {
            line: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(())
}

pub fn load_case_data(path: &Path) -> Result<CaseDataFile, DataError> {
    parse_case_data(open(path)?)
}

pub fn load_variant_shares(path: &Path) -> Result<VariantShareFile, DataError> {
    parse_variant_shares(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_consecutive_rows() {
        let data = parse_case_data("date,new_cases\n2021-06-01,5\n2021-06-02,7\n".as_bytes()).unwrap();
        assert_eq!(data.dates.len(), 2);
        assert_eq!(data.new_cases, vec![5.0, 7.0]);
    }

    #[test]
    fn comments_are_skipped() {
        let data = parse_case_data("# generated now\ndate,new_cases\n2021-06-01,5\n".as_bytes()).unwrap();
        assert_eq!(data.new_cases, vec![5.0]);
    }

    #[test]
    fn out_of_order_dates() {
        let err = parse_case_data("date,new_cases\n2021-06-02,5\n2021-06-01,7\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::NonMonotoneDates { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn negative_count() {
        let err = parse_case_data("date,new_cases\n2021-06-01,-5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::NegativeCases { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse_case_data("date,new_cases\n2021-06-01,5\n2021-06-02,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::ParseError { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn wrong_header() {
        let err = parse_case_data("day,cases\n2021-06-01,5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::ParseError { line: 1, .. }));
    }

    #[test]
    fn shares_validated() {
        let ok = parse_variant_shares("window_end_date,emerging_share\n2021-06-14,0.1\n2021-06-28,0.3\n".as_bytes()).unwrap();
        assert_eq!(ok.emerging_share, vec![0.1, 0.3]);
        let err = parse_variant_shares("window_end_date,emerging_share\n2021-06-14,1.2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::ShareOutOfRange { .. }));
        let err = parse_variant_shares("window_end_date,emerging_share\n2021-06-14,0.1\n2021-06-21,0.2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::ShareSpacing { .. }));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_variant_shares(Path::new("/nonexistent/shares.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/shares.csv"));
    }
}
