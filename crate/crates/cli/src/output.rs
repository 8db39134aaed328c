use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use smallball::tauberian::Exponent;

use crate::config::SCHEMA_VERSION;

/// Top-level JSON output of every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub schema_version: u32,
    pub command: String,
    pub records: Vec<T>,
}

impl<T> Document<T> {
    pub fn new(command: &str, records: Vec<T>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            records,
        }
    }
}

pub fn json_bytes<T: Serialize>(doc: &Document<T>) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().context("flushing csv")
}

pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Shortest representation that reads back to the same value.
pub fn float(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// Exact rational rounded half away from zero to 12 decimals.
pub fn decimal12(r: Rational64) -> String {
    const SCALE: i128 = 1_000_000_000_000;
    let (n, d) = (*r.numer() as i128, *r.denom() as i128);
    let negative = n < 0;
    let n = n.abs();
    let scaled = (n * SCALE * 2 + d) / (2 * d);
    let (int, frac) = (scaled / SCALE, scaled % SCALE);
    let sign = if negative && scaled != 0 { "-" } else { "" };
    format!("{sign}{int}.{frac:012}")
}

pub fn exponent12(e: Exponent) -> String {
    match e.exact() {
        Some(r) => decimal12(r),
        None => format!("{:.12}", e.to_f64()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digit_rationals() {
        assert_eq!(decimal12(Rational64::new(1, 3)), "0.333333333333");
        assert_eq!(decimal12(Rational64::new(2, 3)), "0.666666666667");
        assert_eq!(decimal12(Rational64::new(-15, 4)), "-3.750000000000");
        assert_eq!(decimal12(Rational64::from_integer(3)), "3.000000000000");
        assert_eq!(decimal12(Rational64::new(-1, 3_000_000_000_000)), "0.000000000000");
    }

    #[test]
    fn floats_read_back() {
        for x in [0.1, 1e-300, 12345.678, 1.0 / 3.0] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
    }
}
