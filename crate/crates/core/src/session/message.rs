//! Wire message catalog. Every request and reply is one JSON object.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::protocol::{Condition, InfoPanel, ReviewData, Stage, StudyTag};
use crate::sim::{Allocation, ControlledView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    Briefing,
    Tutorial,
    AwaitReview,
    AwaitAllocation,
    AwaitOrder,
    MeetingPrompt,
    Survey,
    Debrief,
    Closed,
}

impl fmt::Display for SessionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// Client -> server messages inside a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    /// Acknowledge the briefing or the tutorial introduction.
    Advance,
    /// Open the laptop for the current week.
    ViewState,
    SubmitAllocation { allocation: Allocation },
    SubmitOrder { units: u64 },
    AnswerBubble { text: String, response_time_secs: f64 },
    AnswerSurvey { answers: BTreeMap<String, String> },
    FinishDebrief,
}

impl Message {
    pub fn name(&self) -> &'static str {
        match self {
            Message::Advance => "advance",
            Message::ViewState => "view_state",
            Message::SubmitAllocation { .. } => "submit_allocation",
            Message::SubmitOrder { .. } => "submit_order",
            Message::AnswerBubble { .. } => "answer_bubble",
            Message::AnswerSurvey { .. } => "answer_survey",
            Message::FinishDebrief => "finish_debrief",
        }
    }

    /// The only phase in which this message is accepted.
    pub fn legal_phase(&self) -> SessionPhase {
        match self {
            Message::Advance => SessionPhase::Briefing,
            Message::ViewState => SessionPhase::AwaitReview,
            Message::SubmitAllocation { .. } => SessionPhase::AwaitAllocation,
            Message::SubmitOrder { .. } => SessionPhase::AwaitOrder,
            Message::AnswerBubble { .. } => SessionPhase::MeetingPrompt,
            Message::AnswerSurvey { .. } => SessionPhase::Survey,
            Message::FinishDebrief => SessionPhase::Debrief,
        }
    }

    pub fn is_legal_in(&self, phase: SessionPhase) -> bool {
        match self {
            Message::Advance => matches!(phase, SessionPhase::Briefing | SessionPhase::Tutorial),
            other => other.legal_phase() == phase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Notice {
    TutorialStarted,
    /// Sales and cost figures were reset when gameplay began.
    GameplayStarted,
    /// The disrupted manufacturer announced a shutdown.
    DisruptionNotice,
    GameplayFinished,
}

/// Everything the laptop screen shows for the current week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    #[serde(flatten)]
    pub position: ControlledView,
    pub info: InfoPanel,
    pub profit_to_date: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebriefData {
    pub profit: f64,
    pub condition: String,
    pub weeks_played: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub session: String,
    /// Sequence number of the last persisted event.
    pub seq: u64,
    pub phase: SessionPhase,
    pub week: u32,
    pub stage: Stage,
    pub condition: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<StateView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<ReviewData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<Notice>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub survey_questions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debrief: Option<DebriefData>,
}

/// Transport envelope for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Create { study: StudyTag, seed: u64 },
    Message { session: String, message: Message },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_phase: Option<SessionPhase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Ok { ok: bool, reply: Box<Reply> },
    Err { ok: bool, error: ErrorBody },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::AllocationPolicy;

    #[test]
    fn message_wire_shape() {
        let m = Message::SubmitAllocation { allocation: Allocation::Policy(AllocationPolicy::Hc1First) };
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"type":"submit_allocation","allocation":{"policy":"hc1-first"}}"#
        );
        let o: Message = serde_json::from_str(r#"{"type":"submit_order","units":12}"#).unwrap();
        assert_eq!(o, Message::SubmitOrder { units: 12 });
        let r: Request = serde_json::from_str(r#"{"op":"create","study":"study2","seed":9}"#).unwrap();
        assert_eq!(r, Request::Create { study: StudyTag::Study2, seed: 9 });
    }

    #[test]
    fn phase_names() {
        assert_eq!(SessionPhase::AwaitAllocation.to_string(), "await_allocation");
    }
}
