//! CSV ingestion and output helpers for the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::CliError;

/// A parsed header-plus-rows CSV file with its content hash.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub sha256: String,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Io(format!("{}: bad header: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Io(format!("{}: row {}: {e}", path.display(), i + 1)))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table {
            headers,
            rows,
            sha256: hex(&Sha256::digest(&bytes)),
        })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn require(&self, name: &str, what: &str) -> Result<usize, CliError> {
        self.column(name)
            .ok_or_else(|| CliError::Io(format!("{what} column '{name}' not found in header")))
    }

    pub fn counts(&self, col: usize) -> Result<Vec<u64>, CliError> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| parse_count(&r[col]).ok_or_else(|| self.cell_error(i, col, "a non-negative integer")))
            .collect()
    }

    pub fn reals(&self, cols: &[usize]) -> Result<DMatrix<f64>, CliError> {
        let mut x = DMatrix::zeros(self.rows.len(), cols.len());
        for (i, r) in self.rows.iter().enumerate() {
            for (k, &c) in cols.iter().enumerate() {
                x[(i, k)] = r[c]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.cell_error(i, c, "a finite number"))?;
            }
        }
        Ok(x)
    }

    fn cell_error(&self, row: usize, col: usize, expected: &str) -> CliError {
        CliError::Io(format!(
            "row {}, column '{}': expected {expected}, found '{}'",
            row + 1,
            self.headers[col],
            self.rows[row][col]
        ))
    }
}

fn parse_count(s: &str) -> Option<u64> {
    s.parse::<u64>().ok().or_else(|| {
        let v: f64 = s.parse().ok()?;
        (v >= 0.0 && v.fract() == 0.0 && v < 9.0e15).then_some(v as u64)
    })
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes CSV rows (first row is the header) with a fixed float format.
pub fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    for r in rows {
        w.write_record(r)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn out_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

/// Shortest round-trip representation, independent of locale.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn row<I, S>(items: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: ToString,
{
    items.into_iter().map(|s| s.to_string()).collect()
}
