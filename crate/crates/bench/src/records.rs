//! Record and summary rows with their CSV encodings.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::Method;
use crate::BenchError;

pub const RECORDS_HEADER: &str = "k,trial,method,rel_error,support_match,iterations,restarts,wall_ms,seed";
pub const SUMMARY_HEADER: &str = "k,method,median_rel_error,success_fraction,n_trials";

/// One solve of one method on one `(k, trial)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub k: usize,
    pub trial: usize,
    pub method: Method,
    pub rel_error: f64,
    pub support_match: bool,
    pub iterations: usize,
    pub restarts: usize,
    pub wall_ms: u64,
    pub seed: u64,
}

impl SweepRecord {
    pub fn cell(&self) -> (usize, usize, Method) {
        (self.k, self.trial, self.method)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub k: usize,
    pub method: Method,
    pub median_rel_error: f64,
    pub success_fraction: f64,
    pub n_trials: usize,
}

pub fn record_writer<W: Write>(out: W, with_header: bool) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(with_header).from_writer(out)
}

pub fn write_record<W: Write>(w: &mut csv::Writer<W>, rec: &SweepRecord) -> Result<(), BenchError> {
    w.serialize(rec)?;
    w.flush()?;
    Ok(())
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &str) -> Result<(), BenchError> {
    let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != expected {
        return Err(BenchError::Config(format!(
            "unexpected CSV header {header:?}, expected {expected:?}"
        )));
    }
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<SweepRecord>, BenchError> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, RECORDS_HEADER)?;
    rdr.deserialize().map(|r| r.map_err(BenchError::from)).collect()
}

pub fn read_records_file(path: impl AsRef<std::path::Path>) -> Result<Vec<SweepRecord>, BenchError> {
    read_records(std::fs::File::open(path)?)
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(SUMMARY_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>, BenchError> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, SUMMARY_HEADER)?;
    rdr.deserialize().map(|r| r.map_err(BenchError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: usize, err: f64) -> SweepRecord {
        SweepRecord {
            k,
            trial: 3,
            method: Method::Manifold,
            rel_error: err,
            support_match: true,
            iterations: 17,
            restarts: 1,
            wall_ms: 250,
            seed: u64::MAX,
        }
    }

    #[test]
    fn records_round_trip_with_fixed_header() {
        let mut buf = Vec::new();
        {
            let mut w = record_writer(&mut buf, true);
            write_record(&mut w, &rec(40, 1.234_567_890_123e-9)).unwrap();
            write_record(&mut w, &rec(42, 0.75)).unwrap();
        }
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next(), Some(RECORDS_HEADER));
        assert!(text.contains(",manifold,"));
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec(40, 1.234_567_890_123e-9), rec(42, 0.75)]);
    }

    #[test]
    fn summary_round_trip() {
        let rows = vec![SummaryRow {
            k: 38,
            method: Method::L21,
            median_rel_error: 0.5,
            success_fraction: 2.0 / 3.0,
            n_trials: 3,
        }];
        let mut buf = Vec::new();
        write_summary(&mut buf, &rows).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(SUMMARY_HEADER));
        assert_eq!(read_summary(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn foreign_header_is_rejected() {
        assert!(read_records("a,b\n1,2\n".as_bytes()).is_err());
    }
}
