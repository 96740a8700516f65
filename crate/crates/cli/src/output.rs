//! CSV persistence. Every file starts with a `#`-prefixed block holding the
//! resolved configuration, followed by a header row and data rows in
//! scientific notation with 17 significant digits, enough to round-trip any `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Formats a value with 17 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header comment shared by all files of one invocation.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub config_toml: String,
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn new(config_toml: String) -> Self {
        Self {
            config_toml,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# resolved configuration")?;
        for line in self.config_toml.lines() {
            writeln!(w, "# {line}")?;
        }
        for note in &self.notes {
            writeln!(w, "# note: {note}")?;
        }
        Ok(())
    }
}

pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(
        path: &Path,
        provenance: &Provenance,
        columns: &[&str],
    ) -> Result<Self, CliError> {
        let file = File::create(path)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        provenance.write_to(&mut out)?;
        writeln!(out, "{}", columns.join(","))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            columns: columns.len(),
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<(), CliError> {
        debug_assert_eq!(values.len(), self.columns);
        let line: Vec<String> = values.iter().map(|&v| sci(v)).collect();
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    /// Flushes and returns the file path.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.out.flush()?;
        Ok(self.path)
    }
}

/// Writes a complete table in one go.
pub fn write_table(
    path: &Path,
    provenance: &Provenance,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<PathBuf, CliError> {
    let mut w = CsvWriter::create(path, provenance, columns)?;
    for r in rows {
        w.row(r)?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_round_trips() {
        assert_eq!(sci(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(sci(-0.25), "-2.5000000000000000e-1");
        let v = 0.1 + 0.2;
        assert_eq!(sci(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn table_has_header_block() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let prov = Provenance::new("[run]\nh = 0.1".into()).with_note("desk scale");
        write_table(&path, &prov, &["a", "b"], &[vec![1.0, 2.0]]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# resolved configuration");
        assert_eq!(lines[1], "# [run]");
        assert_eq!(lines[2], "# h = 0.1");
        assert_eq!(lines[3], "# note: desk scale");
        assert_eq!(lines[4], "a,b");
        assert_eq!(lines[5], "1.0000000000000000e0,2.0000000000000000e0");
    }
}
