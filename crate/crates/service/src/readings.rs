//! Append-only JSON-lines log of confirmed readings.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementType {
    Glucose,
    Systolic,
    Diastolic,
    Weight,
    Pulse,
}

impl MeasurementType {
    pub const ALL: [MeasurementType; 5] = [
        Self::Glucose,
        Self::Systolic,
        Self::Diastolic,
        Self::Weight,
        Self::Pulse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Glucose => "glucose",
            Self::Systolic => "systolic",
            Self::Diastolic => "diastolic",
            Self::Weight => "weight",
            Self::Pulse => "pulse",
        }
    }
}

impl fmt::Display for MeasurementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown measurement type {0:?}")]
pub struct UnknownType(pub String);

impl FromStr for MeasurementType {
    type Err = UnknownType;

    fn from_str(s: &str) -> Result<Self, UnknownType> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownType(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub id: u64,
    #[serde(rename = "type")]
    pub kind: MeasurementType,
    pub value: String,
    pub predicted: String,
    #[serde(with = "rfc3339")]
    pub timestamp: DateTime<Utc>,
}

/// A reading before the store assigns its id.
#[derive(Debug, Clone, PartialEq)]
pub struct NewReading {
    pub kind: MeasurementType,
    pub value: String,
    pub predicted: String,
    pub timestamp: DateTime<Utc>,
}

mod rfc3339 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

/// 1 to 3 ASCII digits.
pub fn is_reading_value(s: &str) -> bool {
    (1..=3).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_digit())
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("invalid reading: {0}")]
    Invalid(String),
}

struct Inner {
    file: File,
    readings: Vec<Reading>,
    next_id: u64,
}

/// Readings kept in memory and mirrored to an append-only log. Appends are
/// serialized by a mutex, which also makes id assignment race-free.
pub struct ReadingStore {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl ReadingStore {
    /// Opens (or creates) the log at `path` and replays it. A final line
    /// without its newline is treated as an interrupted write and dropped.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let io_err = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io_err)?;
        }
        let mut readings = Vec::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let mut reader = BufReader::new(File::open(path).map_err(io_err)?);
            let mut line = String::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let n = reader.read_line(&mut line).map_err(io_err)?;
                if n == 0 {
                    break;
                }
                lineno += 1;
                if !line.ends_with('\n') {
                    tracing::warn!(path = %path.display(), line = lineno, "dropping incomplete trailing record");
                    break;
                }
                valid_len += n as u64;
                if line.trim().is_empty() {
                    continue;
                }
                let r: Reading = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                    path: path.to_path_buf(),
                    line: lineno,
                    reason: e.to_string(),
                })?;
                readings.push(r);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        if file.metadata().map_err(io_err)?.len() > valid_len {
            file.set_len(valid_len).map_err(io_err)?;
        }
        let next_id = readings.iter().map(|r| r.id).max().unwrap_or(0) + 1;
        Ok(Self {
            path: path.to_path_buf(),
            inner: Mutex::new(Inner {
                file,
                readings,
                next_id,
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Validates, assigns the next id and appends durably.
    pub fn append(&self, new: NewReading) -> Result<Reading, StoreError> {
        for (field, v) in [("value", &new.value), ("predicted", &new.predicted)] {
            if !is_reading_value(v) {
                return Err(StoreError::Invalid(format!(
                    "{field} must be 1-3 digits, got {v:?}"
                )));
            }
        }
        let mut inner = self.lock();
        let reading = Reading {
            id: inner.next_id,
            kind: new.kind,
            value: new.value,
            predicted: new.predicted,
            timestamp: new.timestamp,
        };
        let mut line = serde_json::to_string(&reading).expect("reading serializes");
        line.push('\n');
        let io_err = |source| StoreError::Io {
            path: self.path.clone(),
            source,
        };
        inner.file.write_all(line.as_bytes()).map_err(io_err)?;
        inner.file.sync_data().map_err(io_err)?;
        inner.next_id += 1;
        inner.readings.push(reading.clone());
        Ok(reading)
    }

    /// Newest first (by timestamp, then id), optionally filtered by type.
    pub fn list(&self, kind: Option<MeasurementType>, limit: usize) -> Vec<Reading> {
        let inner = self.lock();
        let mut out: Vec<Reading> = inner
            .readings
            .iter()
            .filter(|r| kind.is_none_or(|k| r.kind == k))
            .cloned()
            .collect();
        out.sort_by(|a, b| b.timestamp.cmp(&a.timestamp).then(b.id.cmp(&a.id)));
        out.truncate(limit);
        out
    }

    pub fn len(&self) -> usize {
        self.lock().readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flush(&self) -> Result<(), StoreError> {
        self.lock()
            .file
            .sync_all()
            .map_err(|source| StoreError::Io {
                path: self.path.clone(),
                source,
            })
    }
}
