//! Session hosting: the per-player state machine, its event log, and the
//! service that fronts both.

mod event;
mod machine;
mod message;
mod service;
mod store;
mod transport;

pub use event::{read_events, write_events, EventBody, EventKind, SessionEvent, EVENT_SCHEMA_VERSION};
pub use machine::{replay, DecisionRecord, Session, SURVEY_QUESTIONS};
pub use message::{DebriefData, ErrorBody, Message, Notice, Reply, Request, Response, SessionPhase, StateView};
pub use service::{Clock, ManualClock, ServiceConfig, SessionService, SystemClock};
pub use store::{EventStore, FileStore, MemoryStore};
pub use transport::{serve, serve_connection, SessionApi, TcpClient};

use crate::protocol::ProtocolError;
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("malformed: {0}")]
    Malformed(String),
    #[error("event schema version {0} is not supported")]
    SchemaVersion(u32),
    #[error("storage: {0}")]
    Storage(String),
    #[error("{got} is not accepted now; expected a message for phase {expected}")]
    OutOfPhase { expected: SessionPhase, got: &'static str },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("sequence gap: expected {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("replay: {0}")]
    Replay(String),
    #[error("scenario has no controllable agent")]
    NoControlledAgent,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("transport: {0}")]
    Transport(String),
    #[error("server error {}: {}", .0.code, .0.message)]
    Remote(ErrorBody),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Malformed(_) => "malformed",
            SessionError::SchemaVersion(_) => "schema_version",
            SessionError::Storage(_) => "storage",
            SessionError::OutOfPhase { .. } => "out_of_phase",
            SessionError::UnknownSession(_) => "unknown_session",
            SessionError::SequenceGap { .. } => "sequence_gap",
            SessionError::Replay(_) => "replay",
            SessionError::NoControlledAgent => "no_controlled_agent",
            SessionError::Sim(_) => "simulation",
            SessionError::Protocol(_) => "protocol",
            SessionError::Transport(_) => "transport",
            SessionError::Remote(_) => "remote",
        }
    }

    pub fn to_body(&self) -> ErrorBody {
        if let SessionError::Remote(b) = self {
            return b.clone();
        }
        ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
            expected_phase: match self {
                SessionError::OutOfPhase { expected, .. } => Some(*expected),
                _ => None,
            },
        }
    }
}
