//! Line-delimited JSON event logs, one file per session.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use pleasance_core::protocol::{EventRecord, SessionState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One line of the log: the protocol record plus the idempotency key of
/// the request that produced it, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    #[serde(flatten)]
    pub record: EventRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

impl From<EventRecord> for LogLine {
    fn from(record: EventRecord) -> Self {
        Self { record, idempotency_key: None }
    }
}

pub fn encode_line(line: &LogLine) -> Result<String> {
    Ok(serde_json::to_string(line)?)
}

/// Parses a whole log, skipping blank lines.
pub fn parse_log(text: &str, origin: &str) -> Result<Vec<LogLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse { path: origin.to_string(), line: i + 1, message: e.to_string() })
        })
        .collect()
}

pub fn read_log(path: &Path) -> Result<Vec<LogLine>> {
    let mut lines = Vec::new();
    let origin = path.display().to_string();
    for (i, l) in BufReader::new(File::open(path)?).lines().enumerate() {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let line = serde_json::from_str(&l).map_err(|e| Error::Parse { path: origin.clone(), line: i + 1, message: e.to_string() })?;
        lines.push(line);
    }
    Ok(lines)
}

/// Replays `lines` into a session.
pub fn replay(lines: &[LogLine]) -> Result<SessionState> {
    let records: Vec<EventRecord> = lines.iter().map(|l| l.record.clone()).collect();
    Ok(SessionState::replay(&records)?)
}

/// SHA-256 over the canonical encoding of the protocol records, ignoring
/// idempotency keys.
pub fn log_hash(records: &[EventRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(serde_json::to_vec(r).expect("records serialize"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Append-only writer; every append is flushed and synced before returning.
#[derive(Debug)]
pub struct EventLogWriter {
    path: PathBuf,
    file: File,
}

impl EventLogWriter {
    pub fn create(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, lines: &[LogLine]) -> Result<()> {
        let mut buf = String::new();
        for l in lines {
            buf.push_str(&encode_line(l)?);
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}

/// Writes a complete log in one go.
pub fn write_log(path: &Path, records: &[EventRecord]) -> Result<()> {
    let mut w = EventLogWriter::create(path)?;
    let lines: Vec<LogLine> = records.iter().cloned().map(LogLine::from).collect();
    w.append(&lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pleasance_core::protocol::{start_session, Event, ProtocolConfig};
    use pleasance_core::stimulus::default_catalog;

    #[test]
    fn lines_carry_optional_key() {
        let rec = EventRecord { timestamp: 5, session_id: "s".into(), event: Event::FamiliarizationConfirmed };
        let plain = encode_line(&rec.clone().into()).unwrap();
        assert_eq!(plain, r#"{"timestamp":5,"session_id":"s","event_type":"familiarization_confirmed"}"#);
        let keyed = LogLine { record: rec, idempotency_key: Some("k1".into()) };
        let text = encode_line(&keyed).unwrap();
        assert!(text.ends_with(r#""idempotency_key":"k1"}"#));
        assert_eq!(parse_log(&format!("{text}\n\n{plain}\n"), "t").unwrap().len(), 2);
    }

    #[test]
    fn file_round_trip_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = start_session("abc", default_catalog(), 3, ProtocolConfig::default(), 10).unwrap();
        s.confirm_familiarization(11).unwrap();
        let path = dir.path().join("abc.jsonl");
        write_log(&path, s.event_log()).unwrap();
        assert!(EventLogWriter::create(&path).is_err());
        let lines = read_log(&path).unwrap();
        let back = replay(&lines).unwrap();
        assert_eq!(back, s);
        assert_eq!(log_hash(back.event_log()), log_hash(s.event_log()));
        assert_eq!(log_hash(s.event_log()).len(), 64);
    }
}
