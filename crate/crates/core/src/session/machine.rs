//! The per-session state machine. Pure: it turns messages into events and
//! replies, and never touches storage or the network.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::event::{EventBody, SessionEvent, EVENT_SCHEMA_VERSION};
use super::message::{DebriefData, Message, Notice, Reply, SessionPhase, StateView};
use super::SessionError;
use crate::protocol::{
    assign_condition, performance_review, visible_info, Condition, ReviewData, Schedule, StudyTag,
    ThoughtBubbleRecord, BUBBLE_PROMPT,
};
use crate::sim::{Allocation, ExternalDecision, ScenarioConfig, SimState, WeekReport};

pub const SURVEY_QUESTIONS: &[&str] = &[
    "How would you describe your strategy?",
    "Age (optional)",
    "Gender (optional)",
];

/// One ordering decision, with the suggestion the player saw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub week: u32,
    pub units: u64,
    pub suggestion: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: String,
    study: StudyTag,
    seed: u64,
    condition: Condition,
    scenario: ScenarioConfig,
    schedule: Schedule,
    sim: SimState,
    phase: SessionPhase,
    next_seq: u64,
    pending_allocation: Option<Allocation>,
    since_meeting: Vec<WeekReport>,
    reports: Vec<WeekReport>,
    decisions: Vec<DecisionRecord>,
    meetings: Vec<u32>,
    bubbles: Vec<ThoughtBubbleRecord>,
    survey: BTreeMap<String, String>,
}

impl Session {
    /// Draws the condition from `seed` and returns the session with its
    /// `joined` event.
    pub fn create(
        id: &str,
        study: StudyTag,
        seed: u64,
        base: &ScenarioConfig,
        schedule: &Schedule,
        ts_ms: u64,
    ) -> Result<(Session, SessionEvent), SessionError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let condition = assign_condition(&mut rng, study);
        let mut scenario = condition.apply(base, schedule);
        scenario.start_week = schedule.first_week();
        scenario.seed = seed;
        let joined = SessionEvent {
            v: EVENT_SCHEMA_VERSION,
            session: id.to_string(),
            seq: 0,
            week: schedule.first_week(),
            ts_ms,
            body: EventBody::Joined { study, seed, condition, scenario, schedule: schedule.clone() },
        };
        let session = Session::from_joined(&joined)?;
        Ok((session, joined))
    }

    pub fn from_joined(event: &SessionEvent) -> Result<Session, SessionError> {
        let EventBody::Joined { study, seed, condition, scenario, schedule } = &event.body else {
            return Err(SessionError::Replay("log does not start with a joined event".into()));
        };
        if event.seq != 0 {
            return Err(SessionError::Replay("joined event must have sequence number 0".into()));
        }
        let mut sim = SimState::build(scenario)?;
        sim.set_external(true)?;
        Ok(Session {
            id: event.session.clone(),
            study: *study,
            seed: *seed,
            condition: *condition,
            scenario: scenario.clone(),
            schedule: schedule.clone(),
            sim,
            phase: SessionPhase::Briefing,
            next_seq: 1,
            pending_allocation: None,
            since_meeting: Vec::new(),
            reports: Vec::new(),
            decisions: Vec::new(),
            meetings: Vec::new(),
            bubbles: Vec::new(),
            survey: BTreeMap::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn study(&self) -> StudyTag {
        self.study
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn sim(&self) -> &SimState {
        &self.sim
    }

    pub fn reports(&self) -> &[WeekReport] {
        &self.reports
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.decisions
    }

    pub fn meetings(&self) -> &[u32] {
        &self.meetings
    }

    pub fn bubbles(&self) -> &[ThoughtBubbleRecord] {
        &self.bubbles
    }

    pub fn last_seq(&self) -> u64 {
        self.next_seq - 1
    }

    fn player_agent(&self) -> String {
        self.scenario.controllable.clone().unwrap_or_default()
    }

    /// Profit of the player's company since gameplay started.
    pub fn profit(&self) -> f64 {
        self.sim.ledger(&self.player_agent()).map(|l| l.profit()).unwrap_or(0.0)
    }

    fn event(&mut self, week: u32, body: EventBody, ts_ms: u64) -> SessionEvent {
        let e = SessionEvent { v: EVENT_SCHEMA_VERSION, session: self.id.clone(), seq: self.next_seq, week, ts_ms, body };
        self.next_seq += 1;
        e
    }

    /// Reply describing the current phase, without advancing anything.
    pub fn current_reply(&self) -> Reply {
        self.reply(Vec::new(), None)
    }

    fn reply(&self, notices: Vec<Notice>, review: Option<ReviewData>) -> Reply {
        let in_week = matches!(
            self.phase,
            SessionPhase::AwaitReview | SessionPhase::AwaitAllocation | SessionPhase::AwaitOrder
        );
        let view = if in_week {
            self.sim.controllable_view().map(|position| StateView {
                position,
                info: visible_info(&self.condition, &self.sim),
                profit_to_date: self.profit(),
            })
        } else {
            None
        };
        let prompt = (self.phase == SessionPhase::MeetingPrompt).then(|| BUBBLE_PROMPT.to_string());
        let survey_questions = if self.phase == SessionPhase::Survey {
            SURVEY_QUESTIONS.iter().map(|q| q.to_string()).collect()
        } else {
            Vec::new()
        };
        let debrief = matches!(self.phase, SessionPhase::Debrief | SessionPhase::Closed).then(|| DebriefData {
            profit: self.profit(),
            condition: self.condition.label(),
            weeks_played: self.decisions.iter().filter(|d| self.schedule.gameplay_weeks().contains(&d.week)).count()
                as u32,
        });
        Reply {
            session: self.id.clone(),
            seq: self.last_seq(),
            phase: self.phase,
            week: self.sim.week,
            stage: self.schedule.stage(self.sim.week),
            condition: self.condition,
            view,
            review,
            prompt,
            notices,
            survey_questions,
            debrief,
        }
    }

    fn entering_week_notices(&self) -> Vec<Notice> {
        let mut n = Vec::new();
        if self.sim.week == self.schedule.first_week() {
            n.push(Notice::TutorialStarted);
        }
        if self.sim.week == self.schedule.gameplay.0 {
            n.push(Notice::GameplayStarted);
        }
        if self.sim.week == self.schedule.notification_week {
            n.push(Notice::DisruptionNotice);
        }
        n
    }

    /// Applies one message. On error the session is left untouched.
    pub fn apply(&mut self, msg: &Message, ts_ms: u64) -> Result<(Vec<SessionEvent>, Reply), SessionError> {
        if !msg.is_legal_in(self.phase) {
            return Err(SessionError::OutOfPhase { expected: self.phase, got: msg.name() });
        }
        let week = self.sim.week;
        let mut events = Vec::new();
        let mut notices = Vec::new();
        let mut review = None;
        match msg {
            Message::Advance => {
                events.push(self.event(week, EventBody::Advanced {}, ts_ms));
                if self.phase == SessionPhase::Briefing {
                    self.phase = SessionPhase::Tutorial;
                } else {
                    self.phase = SessionPhase::AwaitReview;
                    notices = self.entering_week_notices();
                }
            }
            Message::ViewState => {
                let view = self.sim.controllable_view().ok_or(SessionError::NoControlledAgent)?;
                events.push(self.event(
                    week,
                    EventBody::StateViewed { on_hand: view.on_hand, suggestion: view.suggestion },
                    ts_ms,
                ));
                self.phase =
                    if view.allocation_required { SessionPhase::AwaitAllocation } else { SessionPhase::AwaitOrder };
            }
            Message::SubmitAllocation { allocation } => {
                // Validate against this week's stock before accepting it.
                self.sim
                    .step(Some(&ExternalDecision { order: 0, allocation: Some(allocation.clone()) }))
                    .map_err(|e| SessionError::Malformed(e.to_string()))?;
                events.push(self.event(week, EventBody::AllocationSubmitted { allocation: allocation.clone() }, ts_ms));
                self.pending_allocation = Some(allocation.clone());
                self.phase = SessionPhase::AwaitOrder;
            }
            Message::SubmitOrder { units } => {
                let view = self.sim.controllable_view().ok_or(SessionError::NoControlledAgent)?;
                let decision = ExternalDecision { order: *units, allocation: self.pending_allocation.clone() };
                let (mut next, report) = self.sim.step(Some(&decision))?;
                events.push(self.event(
                    week,
                    EventBody::OrderSubmitted { units: *units, suggestion: view.suggestion },
                    ts_ms,
                ));
                self.decisions.push(DecisionRecord { week, units: *units, suggestion: view.suggestion });
                self.pending_allocation = None;
                self.reports.push(report.clone());
                self.since_meeting.push(report);
                if week == self.schedule.tutorial.1 {
                    next.reset_ledgers();
                    self.since_meeting.clear();
                }
                self.sim = next;
                if self.schedule.is_meeting_week(week) {
                    let r = performance_review(&self.since_meeting, &self.player_agent())?;
                    self.since_meeting.clear();
                    events.push(self.event(week, EventBody::MeetingShown { meeting_week: week }, ts_ms));
                    self.meetings.push(week);
                    self.phase = SessionPhase::MeetingPrompt;
                    review = Some(r);
                } else {
                    self.after_week(&mut notices);
                }
            }
            Message::AnswerBubble { text, response_time_secs } => {
                let meeting_week = self.meetings.last().copied().unwrap_or(week);
                events.push(self.event(
                    meeting_week,
                    EventBody::BubbleAnswered {
                        meeting_week,
                        text: text.clone(),
                        response_time_secs: *response_time_secs,
                    },
                    ts_ms,
                ));
                self.bubbles.push(ThoughtBubbleRecord::new(meeting_week, text.clone(), *response_time_secs));
                self.after_week(&mut notices);
            }
            Message::AnswerSurvey { answers } => {
                events.push(self.event(week, EventBody::SurveyAnswered { answers: answers.clone() }, ts_ms));
                self.survey = answers.clone();
                self.phase = SessionPhase::Debrief;
            }
            Message::FinishDebrief => {
                let profit = self.profit();
                events.push(self.event(week, EventBody::Debriefed { profit }, ts_ms));
                self.phase = SessionPhase::Closed;
            }
        }
        Ok((events, self.reply(notices, review)))
    }

    fn after_week(&mut self, notices: &mut Vec<Notice>) {
        if self.sim.week > self.schedule.last_week() {
            self.phase = SessionPhase::Survey;
            notices.push(Notice::GameplayFinished);
        } else {
            self.phase = SessionPhase::AwaitReview;
            notices.extend(self.entering_week_notices());
        }
    }
}

/// The client message that produced a logged event, if it was client-driven.
fn message_for(event: &SessionEvent) -> Option<Message> {
    Some(match &event.body {
        EventBody::Advanced {} => Message::Advance,
        EventBody::StateViewed { .. } => Message::ViewState,
        EventBody::AllocationSubmitted { allocation } => Message::SubmitAllocation { allocation: allocation.clone() },
        EventBody::OrderSubmitted { units, .. } => Message::SubmitOrder { units: *units },
        EventBody::BubbleAnswered { text, response_time_secs, .. } => {
            Message::AnswerBubble { text: text.clone(), response_time_secs: *response_time_secs }
        }
        EventBody::SurveyAnswered { answers } => Message::AnswerSurvey { answers: answers.clone() },
        EventBody::Debriefed { .. } => Message::FinishDebrief,
        EventBody::Joined { .. } | EventBody::MeetingShown { .. } => return None,
    })
}

/// Rebuilds a session from its log. A log cut short after any event yields
/// the state as of that event.
pub fn replay(events: &[SessionEvent]) -> Result<Session, SessionError> {
    let first = events.first().ok_or_else(|| SessionError::Replay("empty log".into()))?;
    for (i, e) in events.iter().enumerate() {
        if e.seq != i as u64 {
            return Err(SessionError::SequenceGap { expected: i as u64, found: e.seq });
        }
        if e.v != EVENT_SCHEMA_VERSION {
            return Err(SessionError::SchemaVersion(e.v));
        }
        if e.session != first.session {
            return Err(SessionError::Replay(format!("event {} belongs to session {}", e.seq, e.session)));
        }
    }
    let mut session = Session::from_joined(first)?;
    let mut i = 1;
    while i < events.len() {
        let e = &events[i];
        let msg = message_for(e)
            .ok_or_else(|| SessionError::Replay(format!("event {} ({:?}) has no originating message", e.seq, e.kind())))?;
        let (produced, _) = session.apply(&msg, e.ts_ms)?;
        for p in &produced {
            match events.get(i) {
                Some(logged) if logged.same_content(p) => i += 1,
                Some(logged) => {
                    return Err(SessionError::Replay(format!(
                        "event {} diverges from replay ({:?} vs {:?})",
                        logged.seq,
                        logged.kind(),
                        p.kind()
                    )))
                }
                // Log cut between events of one batch.
                None => break,
            }
        }
    }
    Ok(session)
}
