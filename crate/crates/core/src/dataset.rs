//! Delimited-text validation datasets.
//!
//! A header row is required. Column names are case-insensitive:
//!
//! | column      | required | values                         |
//! |-------------|----------|--------------------------------|
//! | `arm`       | yes      | `0` control, `1` treated       |
//! | `outcome`   | yes      | `0` / `1`                      |
//! | `delta`     | yes      | predicted effect in `[-1, 1]`  |
//! | `pi`        | no       | predicted baseline risk        |
//! | `order_key` | no       | covariate for alternate order  |
//! | `id`        | no       | ignored                        |
//!
//! Other columns are ignored unless named as the ordering column. Empty
//! cells in optional columns count as missing. Row numbers in errors are
//! 1-based data rows (the header is not counted).

use std::io::{Read, Write};

use crate::domain::{Arm, SubjectRecord};
use crate::error::{Error, Field, Result};

pub const DEFAULT_ORDER_COLUMN: &str = "order_key";

struct Columns {
    arm: usize,
    outcome: usize,
    delta: usize,
    pi: Option<usize>,
    order: Option<usize>,
}

fn find(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn locate(headers: &csv::StringRecord, order_column: Option<&str>) -> Result<Columns> {
    let required = |name: &str| find(headers, name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let order = match order_column {
        Some(name) => Some(required(name)?),
        None => find(headers, DEFAULT_ORDER_COLUMN),
    };
    Ok(Columns {
        arm: required("arm")?,
        outcome: required("outcome")?,
        delta: required("delta")?,
        pi: find(headers, "pi"),
        order,
    })
}

fn parse_indicator(cell: &str) -> Option<u8> {
    match cell.parse::<f64>().ok()? {
        0.0 => Some(0),
        1.0 => Some(1),
        _ => None,
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads subject records. `order_column` names the alternate ordering
/// column; when `None`, an `order_key` column is used if present.
pub fn parse_dataset<R: Read>(reader: R, order_column: Option<&str>) -> Result<Vec<SubjectRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::EmptyFile);
    }
    let cols = locate(&headers, order_column)?;
    let header_name = |i: usize| headers.get(i).unwrap_or("").trim().to_string();

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| Error::Io(format!("row {row_no}: {e}")))?;
        let cell = |c: usize| row.get(c).unwrap_or("");
        let bad = |c: usize| Error::BadValue {
            row: row_no,
            column: header_name(c),
            value: cell(c).to_string(),
        };
        let optional = |c: Option<usize>| -> Result<Option<f64>> {
            match c {
                Some(c) if !cell(c).is_empty() => parse_number(cell(c)).map(Some).ok_or_else(|| bad(c)),
                _ => Ok(None),
            }
        };

        let arm = parse_indicator(cell(cols.arm))
            .and_then(Arm::from_indicator)
            .ok_or_else(|| bad(cols.arm))?;
        let outcome = parse_indicator(cell(cols.outcome)).ok_or_else(|| bad(cols.outcome))? == 1;
        let delta = parse_number(cell(cols.delta)).ok_or_else(|| bad(cols.delta))?;
        let record = SubjectRecord {
            arm,
            outcome,
            delta,
            pi: optional(cols.pi)?,
            order_key: optional(cols.order)?,
        };
        record.validate(i).map_err(|e| match e {
            Error::FieldOutOfRange { field, .. } => {
                let c = match field {
                    Field::Delta => cols.delta,
                    Field::Pi | Field::TreatedRisk => cols.pi.unwrap_or(cols.delta),
                    Field::OrderKey => cols.order.unwrap_or(cols.delta),
                    Field::Arm => cols.arm,
                    Field::Outcome => cols.outcome,
                };
                bad(c)
            }
            other => other,
        })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(records)
}

/// Writes records with columns `arm,outcome,delta,pi,order_key`; missing
/// optional values become empty cells.
pub fn write_dataset<W: Write>(records: &[SubjectRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["arm", "outcome", "delta", "pi", DEFAULT_ORDER_COLUMN])
        .map_err(io)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.arm.indicator().to_string(),
            (r.outcome as u8).to_string(),
            r.delta.to_string(),
            opt(r.pi),
            opt(r.order_key),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
