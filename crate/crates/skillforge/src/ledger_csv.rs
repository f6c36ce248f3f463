//! The trajectory ledger as a header-bearing CSV file.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use skillforge_core::ledger::HEADER;
use skillforge_core::{LearningEvent, LedgerError, LedgerEvent};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LedgerIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: header does not match the ledger schema: {found}")]
    Header { path: PathBuf, found: String },
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}: line {line}: {source}")]
    Row { path: PathBuf, line: u64, source: LedgerError },
    #[error("row rejected: {0}")]
    Rejected(LedgerError),
}

impl LedgerIoError {
    /// Whether this is an I/O failure rather than bad content.
    pub fn is_io(&self) -> bool {
        matches!(self, LedgerIoError::Io { .. })
    }
}

fn csv_err(path: &Path, e: csv::Error) -> LedgerIoError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => LedgerIoError::Io { path: path.to_path_buf(), source },
        kind => LedgerIoError::Parse { path: path.to_path_buf(), line, message: format!("{kind:?}") },
    }
}

/// Appends validated rows; rows already written are never touched.
pub struct LedgerWriter<W: Write> {
    inner: csv::Writer<W>,
    path: PathBuf,
    rows: u64,
}

impl LedgerWriter<File> {
    /// Creates or truncates `path` and writes the header.
    pub fn create(path: &Path) -> Result<Self, LedgerIoError> {
        let file = File::create(path).map_err(|source| LedgerIoError::Io { path: path.into(), source })?;
        let mut w = LedgerWriter::from_writer(file, path);
        w.write_header()?;
        Ok(w)
    }

    /// Opens `path` for appending, writing the header only to a new file.
    pub fn append(path: &Path) -> Result<Self, LedgerIoError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| LedgerIoError::Io { path: path.into(), source })?;
        let empty = file.metadata().map_err(|source| LedgerIoError::Io { path: path.into(), source })?.len() == 0;
        let mut w = LedgerWriter::from_writer(file, path);
        if empty {
            w.write_header()?;
        }
        Ok(w)
    }
}

impl<W: Write> LedgerWriter<W> {
    pub fn from_writer(writer: W, label: &Path) -> Self {
        let inner = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        LedgerWriter { inner, path: label.to_path_buf(), rows: 0 }
    }

    fn write_header(&mut self) -> Result<(), LedgerIoError> {
        self.inner.write_record(HEADER).map_err(|e| csv_err(&self.path, e))
    }

    pub fn write(&mut self, event: &LedgerEvent) -> Result<(), LedgerIoError> {
        event.validate().map_err(LedgerIoError::Rejected)?;
        self.inner.serialize(event).map_err(|e| csv_err(&self.path, e))?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows_written(&self) -> u64 {
        self.rows
    }

    pub fn flush(&mut self) -> Result<(), LedgerIoError> {
        self.inner.flush().map_err(|source| LedgerIoError::Io { path: self.path.clone(), source })
    }

    pub fn into_inner(self) -> Result<W, LedgerIoError> {
        let path = self.path.clone();
        self.inner.into_inner().map_err(|e| LedgerIoError::Io { path, source: e.into_error() })
    }
}

/// Parses and validates every row. The header must match exactly.
pub fn read_ledger_from<R: Read>(reader: R, label: &Path) -> Result<Vec<LedgerEvent>, LedgerIoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(label, e))?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(LedgerIoError::Header { path: label.into(), found: header.iter().collect::<Vec<_>>().join(",") });
    }
    let mut out = Vec::new();
    for result in rdr.deserialize::<LedgerEvent>() {
        let event = result.map_err(|e| csv_err(label, e))?;
        let line = out.len() as u64 + 2;
        event.validate().map_err(|source| LedgerIoError::Row { path: label.into(), line, source })?;
        out.push(event);
    }
    Ok(out)
}

pub fn read_ledger(path: &Path) -> Result<Vec<LedgerEvent>, LedgerIoError> {
    let file = File::open(path).map_err(|source| LedgerIoError::Io { path: path.into(), source })?;
    read_ledger_from(io::BufReader::new(file), path)
}

pub fn write_ledger(path: &Path, rows: &[LedgerEvent]) -> Result<(), LedgerIoError> {
    let mut w = LedgerWriter::create(path)?;
    for r in rows {
        w.write(r)?;
    }
    w.flush()
}

pub fn ledger_bytes(rows: &[LedgerEvent]) -> Result<Vec<u8>, LedgerIoError> {
    let mut w = LedgerWriter::from_writer(Vec::new(), Path::new("<memory>"));
    w.write_header()?;
    for r in rows {
        w.write(r)?;
    }
    w.into_inner()
}

#[derive(Serialize)]
struct LearningRow<'a> {
    task_id: &'a str,
    event: &'static str,
    skill_id: &'a str,
    detail: String,
}

/// Learning events, one per row, with the full event as JSON in `detail`.
pub fn write_learning_events<'a>(
    path: &Path,
    events: impl IntoIterator<Item = (&'a str, &'a LearningEvent)>,
) -> Result<(), LedgerIoError> {
    let file = File::create(path).map_err(|source| LedgerIoError::Io { path: path.into(), source })?;
    let mut w = csv::Writer::from_writer(file);
    for (task_id, e) in events {
        let detail = serde_json::to_string(e).expect("learning events serialize");
        w.serialize(LearningRow { task_id, event: e.kind(), skill_id: e.skill_id(), detail }).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| LedgerIoError::Io { path: path.into(), source })
}

/// Path of the learning-event file that accompanies a ledger.
pub fn learning_path(ledger: &Path) -> PathBuf {
    let stem = ledger.file_stem().and_then(|s| s.to_str()).unwrap_or("ledger");
    ledger.with_file_name(format!("{stem}.learning.csv"))
}
