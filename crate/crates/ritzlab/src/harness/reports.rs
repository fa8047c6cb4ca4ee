//! Deterministic CSV and JSON report writers.
//!
//! Floats are written with Rust's shortest round-trip formatting, and all
//! computations feeding these files are sequential, so repeated runs with
//! the same configuration produce byte-identical outputs.

use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Incremental CSV writer; every row is flushed so partial results survive
/// a failed study.
pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &str) -> std::io::Result<CsvWriter> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{header}")?;
        out.flush()?;
        Ok(CsvWriter { out })
    }

    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        self.out.flush()
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), std::io::Error> {
    let mut out = BufWriter::new(File::create(path)?);
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    writeln!(out, "{text}")?;
    out.flush()
}
