//! Delimited price sheets with a header row naming the timestamp and price
//! columns.

use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use gauge_cspi_core::market::PriceSeries;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SheetFormat {
    /// `None` picks tab when the header contains one, comma otherwise.
    pub delimiter: Option<u8>,
    pub timestamp_column: String,
    pub price_column: String,
}

impl Default for SheetFormat {
    fn default() -> Self {
        Self { delimiter: None, timestamp_column: "timestamp".into(), price_column: "price".into() }
    }
}

/// Epoch seconds, RFC 3339, or a naive `YYYY-MM-DD[ T]HH:MM:SS[.f]` read as UTC.
pub fn parse_timestamp(s: &str) -> Option<f64> {
    if let Ok(t) = s.parse::<f64>() {
        return t.is_finite().then_some(t);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp_micros() as f64 / 1e6);
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|t| t.and_utc().timestamp_micros() as f64 / 1e6)
}

pub fn parse_price_sheet(text: &str, format: &SheetFormat, path: &Path) -> Result<PriceSeries, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::EmptyFile(path.to_path_buf()));
    }
    let first = text.lines().next().unwrap_or("");
    let delimiter = format.delimiter.unwrap_or(if first.contains('\t') { b'\t' } else { b',' });
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).trim(csv::Trim::All).from_reader(text.as_bytes());
    let parse_err = |row: usize, reason: String| CliError::Parse { path: path.to_path_buf(), row, reason };
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| parse_err(1, format!("no column named {name:?}")))
    };
    let (tc, pc) = (column(&format.timestamp_column)?, column(&format.price_column)?);
    let (mut timestamps, mut prices) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            parse_err(row, e.to_string())
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let t = parse_timestamp(field(tc)).ok_or_else(|| parse_err(row, format!("bad timestamp {:?}", field(tc))))?;
        let p: f64 = field(pc).parse().map_err(|_| parse_err(row, format!("bad price {:?}", field(pc))))?;
        if !(p > 0.0) || !p.is_finite() {
            return Err(parse_err(row, format!("non-positive price {p}")));
        }
        if timestamps.last().is_some_and(|&last| t <= last) {
            return Err(parse_err(row, "non-increasing timestamp".into()));
        }
        timestamps.push(t);
        prices.push(p);
    }
    if prices.is_empty() {
        return Err(CliError::EmptyFile(path.to_path_buf()));
    }
    Ok(PriceSeries::new(timestamps, prices)?)
}

pub fn load_price_sheet(path: &Path, format: &SheetFormat) -> Result<PriceSeries, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_price_sheet(&text, format, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PriceSeries, CliError> {
        parse_price_sheet(text, &SheetFormat::default(), Path::new("sheet.csv"))
    }

    #[test]
    fn three_rows() {
        let s = parse("timestamp,price\n0,100\n60,100.5\n120,99\n").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.prices()[2], 99.0);
    }

    #[test]
    fn tabs_and_iso_times() {
        let s = parse("price\ttimestamp\n1.5\t2024-01-02T09:30:00Z\n1.6\t2024-01-02 09:31:00\n").unwrap();
        assert_eq!(s.timestamps()[1] - s.timestamps()[0], 60.0);
        assert_eq!(s.timestamps()[0], 1_704_187_800.0);
    }

    #[test]
    fn bad_rows_cite_the_row() {
        match parse("timestamp,price\n0,100\n60,-1.0\n") {
            Err(CliError::Parse { row, reason, .. }) => {
                assert_eq!(row, 3);
                assert!(reason.contains("non-positive"));
            }
            other => panic!("{other:?}"),
        }
        match parse("timestamp,price\n0,100\n0,101\n") {
            Err(CliError::Parse { row: 3, reason, .. }) => assert_eq!(reason, "non-increasing timestamp"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("timestamp,price\nnoon,1\n"), Err(CliError::Parse { row: 2, .. })));
        assert!(matches!(parse("time,price\n0,1\n"), Err(CliError::Parse { row: 1, .. })));
    }

    #[test]
    fn headers_only_is_empty() {
        assert!(matches!(parse("timestamp,price\n"), Err(CliError::EmptyFile(_))));
        assert!(matches!(parse(""), Err(CliError::EmptyFile(_))));
    }
}
