//! CSV and JSON serialisation of result rows.

use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

use super::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Unknown(format!("format {s}"))),
        }
    }
}

impl OutputFormat {
    /// Guess from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

/// Columns are written in struct order, one row per experiment.
pub fn emit_results<W: Write>(rows: &[ResultRow], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn read_results<R: Read>(input: R, format: OutputFormat) -> Result<Vec<ResultRow>> {
    match format {
        OutputFormat::Csv => {
            let mut r = csv::Reader::from_reader(input);
            r.deserialize().map(|row| row.map_err(Error::from)).collect()
        }
        OutputFormat::Json => Ok(serde_json::from_reader(input)?),
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow], format: OutputFormat) -> Result<()> {
    let file = std::fs::File::create(path)?;
    emit_results(rows, format, std::io::BufWriter::new(file))
}
