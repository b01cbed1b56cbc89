//! File emission: CSV tables, JSON documents and output paths.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "PERCOLATE_OUTPUT_DIR";

/// Relative paths resolve against `$PERCOLATE_OUTPUT_DIR` when it is set.
pub fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Opens `path` for writing, creating parent directories.
pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Fails early when `path` cannot be written, leaving existing content alone.
pub fn ensure_writable(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    OpenOptions::new()
        .append(true)
        .create(true)
        .open(path)
        .map(drop)
        .map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Runtime(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Shortest text that reads back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// A rectangular text table, the in-memory form of every emitted CSV.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<String>) -> Self {
        CsvTable {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, w: impl Write) -> Result<(), CliError> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            out.write_record(row).map_err(csv_err)?;
        }
        out.flush().map_err(|e| CliError::Runtime(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = create(path)?;
        self.write_to(&mut w)?;
        w.flush().map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<CsvTable, CliError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(csv_err)?;
        let header = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(String::from)
            .collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(csv_err)?;
        Ok(CsvTable { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Runtime(format!("csv: {e}"))
}

/// `time,h_1,...,h_K`
pub fn trajectory_table(points: impl IntoIterator<Item = (f64, Vec<f64>)>, k: usize) -> CsvTable {
    let mut header = vec!["time".to_string()];
    header.extend((1..=k).map(|c| format!("h_{c}")));
    let mut t = CsvTable::new(header);
    for (time, h) in points {
        let mut row = vec![fmt_f64(time)];
        row.extend(h.iter().map(|x| fmt_f64(*x)));
        t.push(row);
    }
    t
}
