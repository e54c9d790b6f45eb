//! CSV emitters and parsers for Strehl series, aggregates, sweep grids, and
//! benchmark reports. Floats are written with the shortest representation
//! that round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::container::write_atomic;
use crate::metrics::{AggregateRow, StrehlRecord};

pub const STREHL_HEADER: &str = "frame,strehl,seconds";
pub const AGGREGATE_HEADER: &str = "frame,min,q1,median,q3,max,mean";
pub const SWEEP_HEADER: &str = "alpha,lambda,mean_strehl";

pub fn write_strehl_csv(path: &Path, records: &[StrehlRecord]) -> Result<()> {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(STREHL_HEADER);
    out.push('\n');
    for rec in records {
        writeln!(out, "{},{},{}", rec.frame, rec.strehl, rec.seconds).expect("string write");
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_strehl_csv(path: &Path) -> Result<Vec<StrehlRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == STREHL_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "expected header '{STREHL_HEADER}', found {other:?}"
            )))
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse_err = |what: &str| Error::Format(format!("row {}: bad {what}", idx + 1));
        let frame = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("frame"))?;
        let strehl = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("strehl"))?;
        let seconds = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("seconds"))?;
        if parts.next().is_some() {
            return Err(parse_err("column count"));
        }
        records.push(StrehlRecord {
            frame,
            strehl,
            seconds,
        });
    }
    Ok(records)
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.frame, row.min, row.q1, row.median, row.q3, row.max, row.mean
        )
        .expect("string write");
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == AGGREGATE_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "expected header '{AGGREGATE_HEADER}', found {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Format(format!(
                "row {}: expected 7 columns, found {}",
                idx + 1,
                fields.len()
            )));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse()
                .map_err(|_| Error::Format(format!("row {}: bad column {k}", idx + 1)))
        };
        rows.push(AggregateRow {
            frame: fields[0]
                .parse()
                .map_err(|_| Error::Format(format!("row {}: bad frame", idx + 1)))?,
            min: num(1)?,
            q1: num(2)?,
            median: num(3)?,
            q3: num(4)?,
            max: num(5)?,
            mean: num(6)?,
        });
    }
    Ok(rows)
}

/// One sweep-grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub lambda: f64,
    pub mean_strehl: f64,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        writeln!(out, "{},{},{}", row.alpha, row.lambda, row.mean_strehl).expect("string write");
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SWEEP_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "expected header '{SWEEP_HEADER}', found {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!("row {}: expected 3 columns", idx + 1)));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse()
                .map_err(|_| Error::Format(format!("row {}: bad column {k}", idx + 1)))
        };
        rows.push(SweepRow {
            alpha: num(0)?,
            lambda: num(1)?,
            mean_strehl: num(2)?,
        });
    }
    Ok(rows)
}
