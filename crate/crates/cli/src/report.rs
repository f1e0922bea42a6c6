//! Append-safe CSV reports: the header is written only when the file is new
//! or empty, and an existing file must carry the same header.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::CliError;

pub struct Report {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn line(fields: &[impl AsRef<str>]) -> String {
        fields.iter().map(|f| f.as_ref()).collect::<Vec<_>>().join(",")
    }

    /// Appends the rows to `path`, or prints header and rows to stdout.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        let Some(path) = path else {
            println!("{}", Self::line(self.header));
            for r in &self.rows {
                println!("{}", Self::line(r));
            }
            return Ok(());
        };
        let header = Self::line(self.header);
        let existing = std::fs::metadata(path).map(|m| m.len()).unwrap_or(0);
        if existing > 0 {
            let mut first = String::new();
            BufReader::new(std::fs::File::open(path)?).read_line(&mut first)?;
            if first.trim_end() != header {
                return Err(CliError::Usage(format!(
                    "{} has a different header; refusing to append",
                    path.display()
                )));
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if existing == 0 {
            writeln!(file, "{header}")?;
        }
        for r in &self.rows {
            writeln!(file, "{}", Self::line(r))?;
        }
        Ok(())
    }
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Scientific notation with 6 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.5e}")
}

/// Seconds with millisecond resolution.
pub fn secs(x: f64) -> String {
    format!("{x:.3}")
}
