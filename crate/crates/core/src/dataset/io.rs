//! JSON-lines session files and the ground-truth map.
//!
//! One session per line:
//! `{"task_id":"task-000","sampling_rate":5.0,"onsets":[{"time_s":0.0,"kind":"baseline-marker"}],"channels":[[...],[...]]}`.
//! Floats use shortest round-trip decimal encoding, so `read(write(x)) == x`
//! bit for bit.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::RecordingSession;
use crate::error::{Error, Result};

pub fn write_sessions_to<W: Write>(mut out: W, sessions: &[RecordingSession]) -> std::io::Result<()> {
    for s in sessions {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_sessions(path: impl AsRef<Path>, sessions: &[RecordingSession]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_sessions_to(BufWriter::new(file), sessions).map_err(|e| Error::io(path, e))
}

/// Reads sessions, validating each record. Blank lines are skipped.
pub fn read_sessions_from<R: Read>(input: R) -> Result<Vec<RecordingSession>> {
    let mut sessions = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let session: RecordingSession =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        session.validate().map_err(|e| match e {
            Error::Data(m) => Error::parse(lineno, m),
            other => other,
        })?;
        sessions.push(session);
    }
    Ok(sessions)
}

pub fn read_sessions(path: impl AsRef<Path>) -> Result<Vec<RecordingSession>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sessions_from(file)
}

pub fn write_truth(path: impl AsRef<Path>, truth: &BTreeMap<String, usize>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(truth).map_err(|e| Error::Serialize(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<BTreeMap<String, usize>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))
}
