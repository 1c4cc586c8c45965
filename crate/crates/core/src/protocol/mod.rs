//! Experimental design: conditions, the event calendar, information
//! sharing, performance reviews, the thought-bubble prompt and incentives.

mod condition;
mod incentive;
mod info;
mod review;
mod schedule;

use serde::{Deserialize, Serialize};

pub use condition::{assign_condition, assign_condition_at, Condition, DisruptionSite, InfoLevel, StudyTag};
pub use incentive::{cohort_mean, raffle_tickets, PROFIT_PER_TICKET};
pub use info::{visible_info, BehaviorNote, DeliveryRate, InfoPanel};
pub use review::{performance_review, ReviewData};
pub use schedule::{Schedule, Stage};

/// The question the boss asks at every monthly meeting.
pub const BUBBLE_PROMPT: &str = "How do you think we are doing Kate?";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoughtBubbleRecord {
    pub week: u32,
    pub prompt: String,
    pub response: String,
    pub response_time_secs: f64,
}

impl ThoughtBubbleRecord {
    pub fn new(week: u32, response: impl Into<String>, response_time_secs: f64) -> Self {
        ThoughtBubbleRecord { week, prompt: BUBBLE_PROMPT.to_string(), response: response.into(), response_time_secs }
    }

    pub fn is_unanswered(&self) -> bool {
        self.response.trim().is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("unknown study tag {0:?}")]
    UnknownStudy(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("condition {0:?} is not part of its study design")]
    InvalidCondition(Condition),
    #[error("performance review needs at least one week of history")]
    EmptyHistory,
    #[error("agent {0} not present in history")]
    UnknownAgent(String),
}
