//! Append-only JSON-lines record log.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use cogpath_core::CategoryScheme;
use thiserror::Error;

use crate::state::{ApplyError, LogEntry, State};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt record on line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("record on line {line} does not apply: {source}")]
    Replay { line: usize, source: ApplyError },
}

/// What replay found at the end of the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncation {
    pub line: usize,
    pub discarded_bytes: u64,
}

#[derive(Debug)]
pub struct Recovered {
    pub state: State,
    pub records: usize,
    pub truncation: Option<Truncation>,
}

/// Writer half of the log. Only one may exist per file.
#[derive(Debug)]
pub struct LogStore {
    path: PathBuf,
    file: File,
}

impl LogStore {
    /// Opens (creating if needed) and replays the log. A final line that does
    /// not parse is cut off; an unparseable line followed by valid ones is an error.
    pub fn open(path: &Path, scheme: &CategoryScheme) -> Result<(Self, Recovered), StoreError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut state = State::default();
        let mut records = 0;
        let mut good_end: u64 = 0;
        let mut pending: Option<(usize, String)> = None;
        let mut reader = BufReader::new(&file);
        let mut buf = String::new();
        let mut line_no = 0;
        let mut missing_newline = false;
        loop {
            buf.clear();
            let n = reader.read_line(&mut buf)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            if let Some((line, message)) = pending.take() {
                return Err(StoreError::Corrupt { line, message });
            }
            let text = buf.trim();
            if text.is_empty() {
                good_end += n as u64;
                continue;
            }
            match serde_json::from_str::<LogEntry>(text) {
                Ok(entry) => {
                    state.apply(&entry, scheme).map_err(|source| StoreError::Replay { line: line_no, source })?;
                    records += 1;
                    good_end += n as u64;
                    missing_newline = !buf.ends_with('\n');
                }
                Err(e) => pending = Some((line_no, e.to_string())),
            }
        }
        drop(reader);

        let len = file.metadata()?.len();
        let truncation = match pending {
            Some((line, _)) => {
                file.set_len(good_end)?;
                Some(Truncation { line, discarded_bytes: len - good_end })
            }
            None => None,
        };
        if missing_newline && truncation.is_none() {
            file.write_all(b"\n")?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok((Self { path: path.to_path_buf(), file }, Recovered { state, records, truncation }))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one entry and syncs it to disk.
    pub fn append(&mut self, entry: &LogEntry) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(entry).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}
