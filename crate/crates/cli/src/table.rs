//! Rectangular numeric tables and their byte-stable CSV form.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

#[derive(Debug)]
pub enum TableError {
    Shape(String),
    NonFinite { row: usize, column: String, value: f64 },
    Io { path: PathBuf, source: std::io::Error },
    Parse { path: PathBuf, message: String },
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableError::Shape(m) => write!(f, "table shape: {m}"),
            TableError::NonFinite { row, column, value } => write!(f, "non-finite value {value} in row {row}, column `{column}`"),
            TableError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            TableError::Parse { path, message } => write!(f, "{}: {message}", path.display()),
        }
    }
}

impl std::error::Error for TableError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<(), TableError> {
        if row.len() != self.columns.len() {
            return Err(TableError::Shape(format!("row of {} values for {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Builds a table from equal-length columns.
    pub fn from_columns(columns: Vec<(&str, Vec<f64>)>) -> Result<Self, TableError> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if let Some((name, c)) = columns.iter().find(|c| c.1.len() != n) {
            return Err(TableError::Shape(format!("column `{name}` has {} values, expected {n}", c.len())));
        }
        let mut t = Table::new(columns.iter().map(|c| c.0));
        for i in 0..n {
            t.rows.push(columns.iter().map(|c| c.1[i]).collect());
        }
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// CSV bytes: header, `\n` line ends, 17 significant digits in scientific notation.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>, TableError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| TableError::Shape(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(TableError::Shape(format!("row {i} has {} values for {} columns", row.len(), self.columns.len())));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(TableError::NonFinite {
                    row: i,
                    column: self.columns[j].clone(),
                    value: row[j],
                });
            }
            w.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(io)?;
        }
        w.into_inner().map_err(|e| TableError::Shape(e.to_string()))
    }
}

pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the table and returns the SHA-256 of the file contents.
pub fn write_csv(table: &Table, path: &Path) -> Result<String, TableError> {
    let bytes = table.to_csv_bytes()?;
    fs::write(path, &bytes).map_err(|source| TableError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(checksum(&bytes))
}

pub fn read_csv(path: &Path) -> Result<Table, TableError> {
    let parse = |message: String| TableError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let bytes = fs::read(path).map_err(|source| TableError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let columns: Vec<String> = r.headers().map_err(|e| parse(e.to_string()))?.iter().map(String::from).collect();
    let mut t = Table::new(columns);
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| parse(format!("row {i}: `{s}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        t.push(row).map_err(|e| parse(e.to_string()))?;
    }
    Ok(t)
}
