use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::protocol::{Condition, Schedule, StudyTag};
use crate::sim::{Allocation, ScenarioConfig};

pub const EVENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Joined,
    Advanced,
    StateViewed,
    AllocationSubmitted,
    OrderSubmitted,
    MeetingShown,
    BubbleAnswered,
    SurveyAnswered,
    Debriefed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum EventBody {
    Joined {
        study: StudyTag,
        seed: u64,
        condition: Condition,
        scenario: ScenarioConfig,
        schedule: Schedule,
    },
    Advanced {},
    StateViewed {
        on_hand: u64,
        suggestion: u64,
    },
    AllocationSubmitted {
        allocation: Allocation,
    },
    OrderSubmitted {
        units: u64,
        suggestion: u64,
    },
    MeetingShown {
        meeting_week: u32,
    },
    BubbleAnswered {
        meeting_week: u32,
        text: String,
        response_time_secs: f64,
    },
    SurveyAnswered {
        answers: BTreeMap<String, String>,
    },
    Debriefed {
        profit: f64,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::Joined { .. } => EventKind::Joined,
            EventBody::Advanced {} => EventKind::Advanced,
            EventBody::StateViewed { .. } => EventKind::StateViewed,
            EventBody::AllocationSubmitted { .. } => EventKind::AllocationSubmitted,
            EventBody::OrderSubmitted { .. } => EventKind::OrderSubmitted,
            EventBody::MeetingShown { .. } => EventKind::MeetingShown,
            EventBody::BubbleAnswered { .. } => EventKind::BubbleAnswered,
            EventBody::SurveyAnswered { .. } => EventKind::SurveyAnswered,
            EventBody::Debriefed { .. } => EventKind::Debriefed,
        }
    }
}

/// One line of a session's append-only event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub v: u32,
    pub session: String,
    pub seq: u64,
    pub week: u32,
    pub ts_ms: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

impl SessionEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    /// Equal apart from the wall-clock timestamp.
    pub fn same_content(&self, other: &SessionEvent) -> bool {
        self.v == other.v
            && self.session == other.session
            && self.seq == other.seq
            && self.week == other.week
            && self.body == other.body
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }

    pub fn from_line(line: &str) -> Result<SessionEvent, SessionError> {
        let raw: serde_json::Value =
            serde_json::from_str(line).map_err(|e| SessionError::Malformed(format!("event line: {e}")))?;
        match raw.get("v").and_then(serde_json::Value::as_u64) {
            Some(v) if v == EVENT_SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(SessionError::SchemaVersion(v as u32)),
            None => return Err(SessionError::Malformed("event line has no schema version".into())),
        }
        serde_json::from_value(raw).map_err(|e| SessionError::Malformed(format!("event line: {e}")))
    }
}

pub fn write_events<W: Write>(mut out: W, events: &[SessionEvent]) -> std::io::Result<()> {
    let mut buf = String::new();
    for e in events {
        buf.push_str(&e.to_line());
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())?;
    out.flush()
}

/// Parses a log. A torn final line (no trailing newline and not valid
/// JSON) is dropped, since it can only come from a crash mid-append.
pub fn read_events<R: BufRead>(input: R) -> Result<Vec<SessionEvent>, SessionError> {
    let lines: Vec<String> = input.lines().collect::<Result<_, _>>().map_err(|e| SessionError::Storage(e.to_string()))?;
    let mut out = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match SessionEvent::from_line(line) {
            Ok(e) => out.push(e),
            Err(SessionError::Malformed(_)) if i == last && serde_json::from_str::<serde_json::Value>(line).is_err() => {
                break
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SessionEvent {
        SessionEvent {
            v: EVENT_SCHEMA_VERSION,
            session: "abc".into(),
            seq: 3,
            week: 24,
            ts_ms: 17,
            body: EventBody::BubbleAnswered { meeting_week: 24, text: "".into(), response_time_secs: 3.5 },
        }
    }

    #[test]
    fn line_format() {
        let line = sample().to_line();
        assert_eq!(
            line,
            r#"{"v":1,"session":"abc","seq":3,"week":24,"ts_ms":17,"kind":"bubble-answered","payload":{"meeting_week":24,"text":"","response_time_secs":3.5}}"#
        );
        assert_eq!(SessionEvent::from_line(&line).unwrap(), sample());
    }

    #[test]
    fn schema_mismatch() {
        let line = sample().to_line().replace(r#""v":1"#, r#""v":2"#);
        assert!(matches!(SessionEvent::from_line(&line), Err(SessionError::SchemaVersion(2))));
    }

    #[test]
    fn torn_tail_is_dropped() {
        let mut text = sample().to_line();
        text.push('\n');
        text.push_str(r#"{"v":1,"session":"abc","se"#);
        let events = read_events(text.as_bytes()).unwrap();
        assert_eq!(events.len(), 1);
    }
}
