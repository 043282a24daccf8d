//! JSONL session logs and replay.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Context, Event, LogRecord, Session};
use crate::error::{Error, Result};

/// Appends records to `<dir>/<session>.jsonl`.
#[derive(Debug, Clone)]
pub struct LogDir {
    dir: PathBuf,
}

impl LogDir {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn file_for(&self, session: &str) -> PathBuf {
        self.dir.join(format!("{session}.jsonl"))
    }

    pub fn append(&self, records: &[LogRecord]) -> Result<()> {
        let Some(first) = records.first() else {
            return Ok(());
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.file_for(&first.session))?;
        write_records(file, records)
    }

    /// Every `*.jsonl` log in the directory, sorted by file name.
    pub fn read_all(&self) -> Result<Vec<Vec<LogRecord>>> {
        read_dir(&self.dir)
    }
}

pub fn write_records(w: impl Write, records: &[LogRecord]) -> Result<()> {
    let mut w = BufWriter::new(w);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::Replay(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_dir(dir: &Path) -> Result<Vec<Vec<LogRecord>>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_log(p)).collect()
}

/// Rebuilds a session from its log.
pub fn replay(ctx: &Context, records: &[LogRecord]) -> Result<Session> {
    let (first, rest) = records.split_first().ok_or(Error::Replay("empty log".into()))?;
    let Event::Created(created) = &first.event else {
        return Err(Error::Replay("log does not start with a created event".into()));
    };
    let mut session = Session::from_created(ctx, &first.session, created)?;
    for (i, rec) in rest.iter().enumerate() {
        let at = |msg: String| Error::Replay(format!("record {}: {msg}", i + 2));
        if rec.session != session.id {
            return Err(at(format!("belongs to session {}", rec.session)));
        }
        session.apply(ctx, &rec.event).map_err(|e| at(e.to_string()))?;
        if rec.trial != session.trial {
            return Err(at(format!("logged trial {} but replay is at {}", rec.trial, session.trial)));
        }
    }
    Ok(session)
}
