use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::event::{read_events, SessionEvent};
use super::SessionError;

/// Append-only per-session event storage.
pub trait EventStore: Send + Sync {
    /// Durably appends a batch. Either the whole batch is readable afterwards
    /// or the call fails.
    fn append(&self, session: &str, events: &[SessionEvent]) -> Result<(), SessionError>;
    /// All events of a session, empty if it has none.
    fn load(&self, session: &str) -> Result<Vec<SessionEvent>, SessionError>;
    fn sessions(&self) -> Result<Vec<String>, SessionError>;
}

/// One `<session>.jsonl` file per session under a data directory.
#[derive(Debug, Clone)]
pub struct FileStore {
    dir: PathBuf,
}

fn storage(e: std::io::Error) -> SessionError {
    SessionError::Storage(e.to_string())
}

impl FileStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<FileStore, SessionError> {
        fs::create_dir_all(dir.as_ref()).map_err(storage)?;
        Ok(FileStore { dir: dir.as_ref().to_path_buf() })
    }

    pub fn path_of(&self, session: &str) -> PathBuf {
        self.dir.join(format!("{session}.jsonl"))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn valid_id(session: &str) -> Result<(), SessionError> {
    let ok = !session.is_empty()
        && session.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(SessionError::Malformed(format!("invalid session id {session:?}")))
    }
}

impl EventStore for FileStore {
    fn append(&self, session: &str, events: &[SessionEvent]) -> Result<(), SessionError> {
        valid_id(session)?;
        let mut buf = String::new();
        for e in events {
            buf.push_str(&e.to_line());
            buf.push('\n');
        }
        let mut f = OpenOptions::new().create(true).append(true).open(self.path_of(session)).map_err(storage)?;
        f.write_all(buf.as_bytes()).map_err(storage)?;
        f.sync_data().map_err(storage)
    }

    fn load(&self, session: &str) -> Result<Vec<SessionEvent>, SessionError> {
        valid_id(session)?;
        match File::open(self.path_of(session)) {
            Ok(f) => read_events(BufReader::new(f)),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(storage(e)),
        }
    }

    fn sessions(&self) -> Result<Vec<String>, SessionError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(storage)? {
            let path = entry.map_err(storage)?.path();
            if path.extension().is_some_and(|x| x == "jsonl") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    out.push(stem.to_string());
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    logs: Mutex<HashMap<String, Vec<SessionEvent>>>,
}

impl MemoryStore {
    pub fn new() -> MemoryStore {
        MemoryStore::default()
    }
}

impl EventStore for MemoryStore {
    fn append(&self, session: &str, events: &[SessionEvent]) -> Result<(), SessionError> {
        let mut logs = self.logs.lock().map_err(|_| SessionError::Storage("store lock poisoned".into()))?;
        logs.entry(session.to_string()).or_default().extend_from_slice(events);
        Ok(())
    }

    fn load(&self, session: &str) -> Result<Vec<SessionEvent>, SessionError> {
        let logs = self.logs.lock().map_err(|_| SessionError::Storage("store lock poisoned".into()))?;
        Ok(logs.get(session).cloned().unwrap_or_default())
    }

    fn sessions(&self) -> Result<Vec<String>, SessionError> {
        let logs = self.logs.lock().map_err(|_| SessionError::Storage("store lock poisoned".into()))?;
        let mut ids: Vec<String> = logs.keys().cloned().collect();
        ids.sort();
        Ok(ids)
    }
}
