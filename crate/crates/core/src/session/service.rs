use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use super::machine::{replay, Session};
use super::message::{Message, Reply, Request, Response};
use super::store::EventStore;
use super::SessionError;
use crate::protocol::{Schedule, StudyTag};
use crate::sim::{ScenarioConfig, SimState};

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// Clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> ManualClock {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub scenario: ScenarioConfig,
    pub schedule: Schedule,
    /// Sessions untouched this long are dropped from memory. Their logs stay
    /// and a later message resumes them by replay.
    pub idle_timeout_ms: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            scenario: ScenarioConfig::default(),
            schedule: Schedule::default(),
            idle_timeout_ms: 30 * 60 * 1000,
        }
    }
}

struct Slot {
    session: Option<Session>,
    last_active_ms: u64,
}

pub struct SessionService<S: EventStore> {
    store: S,
    config: ServiceConfig,
    clock: Arc<dyn Clock>,
    slots: Mutex<HashMap<String, Arc<Mutex<Slot>>>>,
    counter: AtomicU64,
}

impl<S: EventStore> SessionService<S> {
    pub fn new(store: S, config: ServiceConfig) -> Result<Self, SessionError> {
        Self::with_clock(store, config, Arc::new(SystemClock))
    }

    pub fn with_clock(store: S, config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Self, SessionError> {
        if !config.schedule.is_consistent() {
            return Err(SessionError::Malformed("inconsistent schedule".into()));
        }
        // Surface a bad scenario at startup rather than on first join.
        let mut probe = SimState::build(&config.scenario)?;
        probe.set_external(true)?;
        let counter = AtomicU64::new(store.sessions()?.len() as u64);
        Ok(SessionService { store, config, clock, slots: Mutex::new(HashMap::new()), counter })
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, SessionError> {
        let mut slots = self.slots.lock().map_err(|_| SessionError::Storage("session table poisoned".into()))?;
        Ok(slots
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(Slot { session: None, last_active_ms: 0 })))
            .clone())
    }

    pub fn create_session(&self, study: StudyTag, seed: u64) -> Result<Reply, SessionError> {
        let (id, slot) = loop {
            let n = self.counter.fetch_add(1, Ordering::SeqCst);
            let id = format!("s{n:06}-{seed:x}");
            let slot = self.slot(&id)?;
            let guard = slot.lock().map_err(|_| SessionError::Storage("session lock poisoned".into()))?;
            let taken = guard.session.is_some() || !self.store.load(&id)?.is_empty();
            drop(guard);
            if !taken {
                break (id, slot);
            }
        };
        let now = self.clock.now_ms();
        let (session, joined) =
            Session::create(&id, study, seed, &self.config.scenario, &self.config.schedule, now)?;
        let mut guard = slot.lock().map_err(|_| SessionError::Storage("session lock poisoned".into()))?;
        self.store.append(&id, std::slice::from_ref(&joined))?;
        let reply = session.current_reply();
        guard.session = Some(session);
        guard.last_active_ms = now;
        Ok(reply)
    }

    /// Validates, persists, then applies. A message whose events could not
    /// be stored leaves the session as it was.
    pub fn handle_message(&self, id: &str, msg: &Message) -> Result<Reply, SessionError> {
        let slot = self.slot(id)?;
        let mut guard = slot.lock().map_err(|_| SessionError::Storage("session lock poisoned".into()))?;
        if guard.session.is_none() {
            let log = self.store.load(id)?;
            if log.is_empty() {
                drop(guard);
                self.forget(id);
                return Err(SessionError::UnknownSession(id.to_string()));
            }
            guard.session = Some(replay(&log)?);
        }
        let now = self.clock.now_ms();
        let mut next = guard.session.clone().expect("loaded above");
        let (events, reply) = next.apply(msg, now)?;
        self.store.append(id, &events)?;
        guard.session = Some(next);
        guard.last_active_ms = now;
        Ok(reply)
    }

    pub fn handle_request(&self, req: &Request) -> Response {
        let result = match req {
            Request::Create { study, seed } => self.create_session(*study, *seed),
            Request::Message { session, message } => self.handle_message(session, message),
        };
        match result {
            Ok(reply) => Response::Ok { ok: true, reply: Box::new(reply) },
            Err(e) => Response::Err { ok: false, error: e.to_body() },
        }
    }

    fn forget(&self, id: &str) {
        if let Ok(mut slots) = self.slots.lock() {
            slots.remove(id);
        }
    }

    /// Drops idle sessions from memory and returns their ids.
    pub fn expire_idle(&self) -> Vec<String> {
        let now = self.clock.now_ms();
        let Ok(mut slots) = self.slots.lock() else { return Vec::new() };
        let mut expired = Vec::new();
        slots.retain(|id, slot| {
            let Ok(mut s) = slot.try_lock() else { return true };
            if s.session.is_some() && now.saturating_sub(s.last_active_ms) > self.config.idle_timeout_ms {
                s.session = None;
                expired.push(id.clone());
                false
            } else {
                true
            }
        });
        expired.sort();
        expired
    }

    pub fn live_sessions(&self) -> usize {
        self.slots
            .lock()
            .map(|s| s.values().filter(|v| v.lock().map(|g| g.session.is_some()).unwrap_or(false)).count())
            .unwrap_or(0)
    }

    /// Snapshot of a session, loading it from its log if needed.
    pub fn session(&self, id: &str) -> Result<Session, SessionError> {
        let slot = self.slot(id)?;
        let guard = slot.lock().map_err(|_| SessionError::Storage("session lock poisoned".into()))?;
        if let Some(s) = &guard.session {
            return Ok(s.clone());
        }
        drop(guard);
        let log = self.store.load(id)?;
        if log.is_empty() {
            self.forget(id);
            return Err(SessionError::UnknownSession(id.to_string()));
        }
        replay(&log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::store::MemoryStore;
    use crate::session::{EventKind, SessionPhase};

    struct BrokenStore;

    impl EventStore for BrokenStore {
        fn append(&self, _: &str, _: &[crate::session::SessionEvent]) -> Result<(), SessionError> {
            Err(SessionError::Storage("disk full".into()))
        }
        fn load(&self, _: &str) -> Result<Vec<crate::session::SessionEvent>, SessionError> {
            Ok(Vec::new())
        }
        fn sessions(&self) -> Result<Vec<String>, SessionError> {
            Ok(Vec::new())
        }
    }

    #[test]
    fn create_persists_one_joined_event() {
        let svc = SessionService::new(MemoryStore::new(), ServiceConfig::default()).unwrap();
        let r = svc.create_session(StudyTag::Study1, 5).unwrap();
        let log = svc.store().load(&r.session).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].kind(), EventKind::Joined);
        assert_eq!(r.phase, SessionPhase::Briefing);
    }

    #[test]
    fn storage_failure_is_reported() {
        let svc = SessionService::new(BrokenStore, ServiceConfig::default()).unwrap();
        assert!(matches!(svc.create_session(StudyTag::Study1, 1), Err(SessionError::Storage(_))));
    }

    #[test]
    fn unknown_session() {
        let svc = SessionService::new(MemoryStore::new(), ServiceConfig::default()).unwrap();
        assert!(matches!(svc.handle_message("nope", &Message::Advance), Err(SessionError::UnknownSession(_))));
    }

    #[test]
    fn idle_sessions_expire_and_resume() {
        let clock = Arc::new(ManualClock::new(0));
        let config = ServiceConfig { idle_timeout_ms: 1000, ..ServiceConfig::default() };
        let svc = SessionService::with_clock(MemoryStore::new(), config, clock.clone()).unwrap();
        let id = svc.create_session(StudyTag::Study2, 8).unwrap().session;
        svc.handle_message(&id, &Message::Advance).unwrap();
        clock.advance(500);
        assert!(svc.expire_idle().is_empty());
        clock.advance(1000);
        assert_eq!(svc.expire_idle(), vec![id.clone()]);
        assert_eq!(svc.live_sessions(), 0);
        let r = svc.handle_message(&id, &Message::Advance).unwrap();
        assert_eq!(r.phase, SessionPhase::AwaitReview);
        assert_eq!(r.seq, 2);
    }
}
