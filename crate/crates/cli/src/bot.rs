//! Scripted players that drive sessions through the wire protocol.

use std::collections::BTreeMap;

use gamette_core::analysis::BehaviorProfile;
use gamette_core::protocol::{ReviewData, Schedule};
use gamette_core::session::{Message, Reply, SessionApi, SessionError, SessionPhase};
use gamette_core::sim::{Allocation, AllocationPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BotProfile {
    Follower,
    /// Over-orders from `start_week` to the end of the game.
    Hoarder { multiplier: f64, start_week: u32 },
    /// Follows until the disruption notice, then over-orders.
    Reactor { multiplier: f64 },
}

impl BotProfile {
    pub fn planted(&self) -> BehaviorProfile {
        match self {
            BotProfile::Follower => BehaviorProfile::Follower,
            BotProfile::Hoarder { .. } => BehaviorProfile::Hoarder,
            BotProfile::Reactor { .. } => BehaviorProfile::Reactor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BubbleText {
    /// Submits every prompt empty.
    Silent,
    /// Comments on the review figures.
    Template,
}

/// Behavior that makes a session an outlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quirk {
    /// One order of `factor` times the suggestion in `week`.
    Spike { week: u32, factor: u64 },
    /// Stops responding once `week` opens.
    Abandon { week: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotSpec {
    pub profile: BotProfile,
    pub allocation: AllocationPolicy,
    pub bubbles: BubbleText,
    /// Chance that a week's order departs from the profile's rule.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quirk: Option<Quirk>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BotError {
    #[error("multiplier must be at least 1, got {0}")]
    Multiplier(f64),
    #[error("start week {week} is outside gameplay weeks {first}-{last}")]
    StartWeek { week: u32, first: u32, last: u32 },
    #[error("jitter must lie in [0, 1], got {0}")]
    Jitter(f64),
}

impl BotSpec {
    pub fn new(profile: BotProfile) -> BotSpec {
        BotSpec {
            profile,
            allocation: AllocationPolicy::Proportional,
            bubbles: BubbleText::Template,
            jitter: 0.0,
            quirk: None,
        }
    }

    pub fn follower() -> BotSpec {
        BotSpec::new(BotProfile::Follower)
    }

    pub fn hoarder(schedule: &Schedule) -> BotSpec {
        BotSpec::new(BotProfile::Hoarder { multiplier: 1.5, start_week: schedule.gameplay.0 })
    }

    pub fn reactor() -> BotSpec {
        BotSpec::new(BotProfile::Reactor { multiplier: 1.5 })
    }

    pub fn validate(&self, schedule: &Schedule) -> Result<(), BotError> {
        match self.profile {
            BotProfile::Follower => {}
            BotProfile::Hoarder { multiplier, start_week } => {
                check_multiplier(multiplier)?;
                let (first, last) = schedule.gameplay;
                if !(first..=last).contains(&start_week) {
                    return Err(BotError::StartWeek { week: start_week, first, last });
                }
            }
            BotProfile::Reactor { multiplier } => check_multiplier(multiplier)?,
        }
        if !(0.0..=1.0).contains(&self.jitter) {
            return Err(BotError::Jitter(self.jitter));
        }
        Ok(())
    }

    /// The order the profile's rule gives for `week`.
    pub fn rule_order(&self, week: u32, suggestion: u64, schedule: &Schedule) -> u64 {
        let over = |m: f64| (m * suggestion.max(1) as f64).ceil() as u64;
        match self.profile {
            BotProfile::Follower => suggestion,
            BotProfile::Hoarder { multiplier, start_week } if week >= start_week => over(multiplier),
            BotProfile::Reactor { multiplier } if week >= schedule.notification_week => over(multiplier),
            _ => suggestion,
        }
    }
}

fn check_multiplier(m: f64) -> Result<(), BotError> {
    if m.is_finite() && m >= 1.0 {
        Ok(())
    } else {
        Err(BotError::Multiplier(m))
    }
}

/// A spec with its own random stream.
pub struct Bot {
    spec: BotSpec,
    schedule: Schedule,
    rng: ChaCha8Rng,
}

impl Bot {
    pub fn new(spec: BotSpec, schedule: Schedule, seed: u64) -> Bot {
        Bot { spec, schedule, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn spec(&self) -> &BotSpec {
        &self.spec
    }

    fn order(&mut self, week: u32, suggestion: u64) -> u64 {
        if let Some(Quirk::Spike { week: w, factor }) = self.spec.quirk {
            if w == week {
                return factor * suggestion.max(1);
            }
        }
        let rule = self.spec.rule_order(week, suggestion, &self.schedule);
        if self.rng.gen::<f64>() >= self.spec.jitter {
            return rule;
        }
        // Off-rule week: a follower over-orders, the others follow.
        if rule == suggestion {
            (suggestion.max(1) as f64 * self.rng.gen_range(1.2..1.6)).ceil() as u64
        } else {
            suggestion
        }
    }

    fn bubble(&mut self, reply: &Reply) -> String {
        match self.spec.bubbles {
            BubbleText::Silent => String::new(),
            BubbleText::Template => reply.review.as_ref().map(template_comment).unwrap_or_default(),
        }
    }

    /// The next message, or None once the session is over or abandoned.
    pub fn next_message(&mut self, reply: &Reply) -> Option<Message> {
        if let Some(Quirk::Abandon { week }) = self.spec.quirk {
            if reply.week >= week {
                return None;
            }
        }
        Some(match reply.phase {
            SessionPhase::Briefing | SessionPhase::Tutorial => Message::Advance,
            SessionPhase::AwaitReview => Message::ViewState,
            SessionPhase::AwaitAllocation => {
                Message::SubmitAllocation { allocation: Allocation::Policy(self.spec.allocation) }
            }
            SessionPhase::AwaitOrder => {
                let suggestion = reply.view.as_ref()?.position.suggestion;
                Message::SubmitOrder { units: self.order(reply.week, suggestion) }
            }
            SessionPhase::MeetingPrompt => Message::AnswerBubble {
                text: self.bubble(reply),
                response_time_secs: self.rng.gen_range(3.0..40.0_f64).round(),
            },
            SessionPhase::Survey => Message::AnswerSurvey {
                answers: reply
                    .survey_questions
                    .iter()
                    .map(|q| (q.clone(), "I mostly went with the suggested order.".to_string()))
                    .collect::<BTreeMap<_, _>>(),
            },
            SessionPhase::Debrief => Message::FinishDebrief,
            SessionPhase::Closed => return None,
        })
    }
}

/// Short remark on the trend of a review window.
pub fn template_comment(review: &ReviewData) -> String {
    let trend = |xs: &[f64]| match (xs.first(), xs.last()) {
        (Some(a), Some(b)) if b > a => 1,
        (Some(a), Some(b)) if b < a => -1,
        _ => 0,
    };
    let backlog: Vec<f64> = review.backlog.iter().map(|&x| x as f64).collect();
    let inventory: Vec<f64> = review.inventory.iter().map(|&x| x as f64).collect();
    let mut parts = Vec::new();
    match trend(&backlog) {
        1 => parts.push("backlog keeps going up"),
        -1 => parts.push("backlog is coming down"),
        _ => {}
    }
    match trend(&review.profit) {
        1 => parts.push("profit went up"),
        -1 => parts.push("profit went down"),
        _ => parts.push("profit was constant"),
    }
    if trend(&inventory) < 0 {
        parts.push("need to build up inventory");
    }
    if parts.len() == 1 && backlog.iter().all(|&b| b == 0.0) {
        parts.push("good");
    }
    parts.join(". ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Completed,
    Abandoned,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: SessionStatus,
    pub last: Option<Reply>,
    pub bubbles: usize,
    pub error: Option<String>,
}

/// Plays one session from its first reply until the bot stops.
pub fn play(api: &mut impl SessionApi, bot: &mut Bot, first: Reply) -> Outcome {
    let id = first.session.clone();
    let mut last = first;
    let mut bubbles = 0;
    while let Some(msg) = bot.next_message(&last) {
        let is_bubble = matches!(msg, Message::AnswerBubble { .. });
        match api.send(&id, &msg) {
            Ok(reply) => {
                bubbles += usize::from(is_bubble);
                last = reply;
            }
            Err(e) => return failed(last, bubbles, e),
        }
    }
    let status = if last.phase == SessionPhase::Closed { SessionStatus::Completed } else { SessionStatus::Abandoned };
    Outcome { status, last: Some(last), bubbles, error: None }
}

fn failed(last: Reply, bubbles: usize, e: SessionError) -> Outcome {
    Outcome { status: SessionStatus::Failed, last: Some(last), bubbles, error: Some(e.to_string()) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_orders() {
        let s = Schedule::default();
        let h = BotSpec::new(BotProfile::Hoarder { multiplier: 1.5, start_week: 24 });
        assert_eq!(h.rule_order(23, 50, &s), 50);
        assert_eq!(h.rule_order(24, 50, &s), 75);
        assert_eq!(h.rule_order(30, 0, &s), 2);
        let r = BotSpec::reactor();
        assert_eq!(r.rule_order(27, 50, &s), 50);
        assert_eq!(r.rule_order(28, 51, &s), 77);
        assert_eq!(BotSpec::follower().rule_order(40, 13, &s), 13);
    }

    #[test]
    fn validation() {
        let s = Schedule::default();
        assert!(BotSpec::hoarder(&s).validate(&s).is_ok());
        let low = BotSpec::new(BotProfile::Reactor { multiplier: 0.9 });
        assert_eq!(low.validate(&s), Err(BotError::Multiplier(0.9)));
        let early = BotSpec::new(BotProfile::Hoarder { multiplier: 2.0, start_week: 18 });
        assert!(matches!(early.validate(&s), Err(BotError::StartWeek { week: 18, .. })));
        let mut j = BotSpec::follower();
        j.jitter = 1.5;
        assert!(j.validate(&s).is_err());
    }

    #[test]
    fn template_mentions_trends() {
        let review = ReviewData {
            backlog: vec![0, 5, 9, 20],
            profit: vec![100.0, 80.0, 60.0, 10.0],
            inventory: vec![40, 20, 0, 0],
            ..ReviewData::default()
        };
        assert_eq!(template_comment(&review), "backlog keeps going up. profit went down. need to build up inventory");
        let calm = ReviewData { backlog: vec![0; 4], profit: vec![5.0; 4], inventory: vec![9; 4], ..ReviewData::default() };
        assert_eq!(template_comment(&calm), "profit was constant. good");
    }
}
