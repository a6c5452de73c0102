use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// A real with 17 significant digits, which round-trips every `f64`.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Several reals in one cell, `;`-separated.
pub fn reals(xs: &[f64]) -> String {
    xs.iter().map(|&x| real(x)).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = ::csv::WriterBuilder::new()
            .terminator(::csv::Terminator::Any(b'\n'))
            .from_writer(w);
        let io = |e: ::csv::Error| Error::Io(e.to_string());
        out.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            out.write_record(r).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes to `path`, or to standard output when there is none.
    pub fn emit(&self, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => self.write_to(std::fs::File::create(p)?),
            None => self.write_to(std::io::stdout().lock()),
        }
    }
}
