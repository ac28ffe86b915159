//! Strict CSV ingestion and emission.
//!
//! Two file shapes are understood: closing prices (`date,close`) and
//! percent log-returns (`t,return`). Rows are parsed strictly and errors
//! carry the offending line number. Floats are written with 17 significant
//! digits so emitted files re-read bit-identically.

use anyhow::{bail, Context, Result};
use novas_core::eval::fmt_float17;
use novas_core::{PriceSeries, ReturnSeries};
use std::fs;
use std::path::Path;

pub const PRICE_HEADER: &str = "date,close";
pub const RETURN_HEADER: &str = "t,return";

fn split_two(line: &str, line_no: usize) -> Result<(&str, &str)> {
    let mut parts = line.split(',');
    let a = parts.next().unwrap_or("");
    let Some(b) = parts.next() else {
        bail!("line {line_no}: expected two comma-separated fields");
    };
    if parts.next().is_some() {
        bail!("line {line_no}: expected exactly two fields");
    }
    Ok((a.trim(), b.trim()))
}

fn parse_value(field: &str, what: &str, line_no: usize) -> Result<f64> {
    if field.is_empty() {
        bail!("line {line_no}: blank {what} field");
    }
    field
        .parse::<f64>()
        .with_context(|| format!("line {line_no}: cannot parse {what} '{field}'"))
}

/// Reads a `date,close` file into a validated price series with the dates
/// kept as labels.
pub fn ingest_csv(path: &Path) -> Result<PriceSeries> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        bail!("{}: empty file", path.display());
    };
    if header.trim() != PRICE_HEADER {
        bail!(
            "{}: expected header '{PRICE_HEADER}', found '{}'",
            path.display(),
            header.trim()
        );
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let (date, close) = split_two(line, line_no)?;
        let value = parse_value(close, "close", line_no)?;
        if !(value.is_finite() && value > 0.0) {
            bail!("line {line_no}: close {value} is not strictly positive");
        }
        labels.push(date.to_string());
        values.push(value);
    }
    PriceSeries::with_labels(values, Some(labels))
        .with_context(|| format!("{}: invalid price series", path.display()))
}

/// Reads a `t,return` file.
pub fn read_returns_csv(path: &Path) -> Result<ReturnSeries> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        bail!("{}: empty file", path.display());
    };
    if header.trim() != RETURN_HEADER {
        bail!(
            "{}: expected header '{RETURN_HEADER}', found '{}'",
            path.display(),
            header.trim()
        );
    }
    let mut values = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let (_, ret) = split_two(line, line_no)?;
        values.push(parse_value(ret, "return", line_no)?);
    }
    ReturnSeries::new(values).with_context(|| format!("{}: invalid return series", path.display()))
}

/// Serializes a return series in the `t,return` shape.
pub fn returns_to_csv(returns: &ReturnSeries) -> String {
    let mut out = String::from(RETURN_HEADER);
    out.push('\n');
    for (i, y) in returns.values().iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, fmt_float17(*y)));
    }
    out
}

/// Per-window forecast/realized pairs in a plot-ready shape.
pub fn series_to_csv(series: &[novas_core::MethodSeries]) -> String {
    let mut out = String::from("method,horizon,window,prediction,realized\n");
    for ms in series {
        for agg in &ms.per_horizon {
            for (w, (v, r)) in agg.values.iter().zip(&agg.realized).enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    ms.method.label(),
                    agg.horizon,
                    w + 1,
                    fmt_float17(*v),
                    fmt_float17(*r)
                ));
            }
        }
    }
    out
}
