//! Bot cohorts driven through a session service, embedded or remote.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, Context};
use gamette_core::analysis::BehaviorProfile;
use gamette_core::protocol::{Condition, Schedule, StudyTag};
use gamette_core::session::{EventStore, SessionApi, SessionError, SessionPhase, SessionService, TcpClient};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bot::{play, Bot, BotProfile, BotSpec, BubbleText, Quirk, SessionStatus};

/// Hands out one session API per worker.
pub trait Connector: Sync {
    type Api: SessionApi;
    fn connect(&self) -> Result<Self::Api, SessionError>;
}

impl<S: EventStore> Connector for Arc<SessionService<S>> {
    type Api = Arc<SessionService<S>>;
    fn connect(&self) -> Result<Self::Api, SessionError> {
        Ok(Arc::clone(self))
    }
}

/// A server reached over TCP.
pub struct Remote(pub SocketAddr);

impl Connector for Remote {
    type Api = TcpClient;
    fn connect(&self) -> Result<TcpClient, SessionError> {
        TcpClient::connect(self.0)
    }
}

/// How many bots of each kind a cohort holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Mix {
    pub follower: usize,
    pub hoarder: usize,
    pub reactor: usize,
    /// Followers with one extreme order.
    pub spike: usize,
    /// Followers that quit mid-game.
    pub abandon: usize,
}

impl Mix {
    pub fn total(&self) -> usize {
        self.follower + self.hoarder + self.reactor + self.spike + self.abandon
    }
}

impl FromStr for Mix {
    type Err = String;

    /// `follower=20,hoarder=20,reactor=20,spike=2,abandon=1`; omitted kinds are zero.
    fn from_str(s: &str) -> Result<Mix, String> {
        let mut mix = Mix::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, n) = part.split_once('=').ok_or_else(|| format!("expected kind=count, got {part:?}"))?;
            let n: usize = n.trim().parse().map_err(|_| format!("bad count in {part:?}"))?;
            let slot = match name.trim() {
                "follower" => &mut mix.follower,
                "hoarder" => &mut mix.hoarder,
                "reactor" => &mut mix.reactor,
                "spike" => &mut mix.spike,
                "abandon" => &mut mix.abandon,
                other => return Err(format!("unknown bot kind {other:?}")),
            };
            *slot += n;
        }
        if mix.total() == 0 {
            return Err("cohort is empty".into());
        }
        Ok(mix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortPlan {
    pub study: StudyTag,
    pub seed: u64,
    pub bots: Vec<BotSpec>,
}

impl CohortPlan {
    /// Bots for `mix` in a seeded random order.
    pub fn from_mix(study: StudyTag, seed: u64, mix: Mix, jitter: f64, bubbles: BubbleText, schedule: &Schedule) -> CohortPlan {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let with = |mut b: BotSpec| {
            b.jitter = jitter;
            b.bubbles = bubbles;
            b
        };
        let mut bots = Vec::with_capacity(mix.total());
        bots.extend((0..mix.follower).map(|_| with(BotSpec::follower())));
        bots.extend((0..mix.hoarder).map(|_| with(BotSpec::hoarder(schedule))));
        bots.extend((0..mix.reactor).map(|_| with(BotSpec::reactor())));
        let (first, last) = schedule.gameplay;
        for _ in 0..mix.spike {
            let mut b = with(BotSpec::follower());
            b.quirk = Some(Quirk::Spike { week: rng.gen_range(first..=last), factor: 25 });
            bots.push(b);
        }
        for _ in 0..mix.abandon {
            let mut b = with(BotSpec::follower());
            b.quirk = Some(Quirk::Abandon { week: rng.gen_range(first + 1..=last) });
            bots.push(b);
        }
        bots.shuffle(&mut rng);
        CohortPlan { study, seed, bots }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub session: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    pub bot: BotSpec,
    pub planted: BehaviorProfile,
    /// Whether the bot was built to be excluded as an outlier.
    pub outlier: bool,
    pub status: SessionStatus,
    pub bubbles: usize,
    pub last_week: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub study: StudyTag,
    pub seed: u64,
    pub sessions: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn planted(&self) -> HashMap<String, BehaviorProfile> {
        self.sessions.iter().map(|e| (e.session.clone(), e.planted)).collect()
    }

    pub fn failures(&self) -> usize {
        self.sessions.iter().filter(|e| e.status == SessionStatus::Failed).count()
    }

    pub fn load(path: &Path) -> anyhow::Result<Manifest> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn entry(bot: &BotSpec, seed: u64) -> ManifestEntry {
    ManifestEntry {
        session: String::new(),
        seed,
        condition: None,
        bot: bot.clone(),
        planted: bot.profile.planted(),
        outlier: bot.quirk.is_some(),
        status: SessionStatus::Failed,
        bubbles: 0,
        last_week: 0,
        profit: None,
        error: None,
    }
}

/// Creates every session in plan order, then plays them in parallel. A
/// failing session is recorded and the rest carry on.
pub fn run_cohort<C: Connector>(conn: &C, plan: &CohortPlan, schedule: &Schedule) -> anyhow::Result<Manifest> {
    for (i, b) in plan.bots.iter().enumerate() {
        b.validate(schedule).with_context(|| format!("bot {i}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let seeds: Vec<u64> = plan.bots.iter().map(|_| rng.gen()).collect();
    let mut api = conn.connect().context("connecting to the session service")?;
    let created: Vec<(ManifestEntry, Option<_>)> = plan
        .bots
        .iter()
        .zip(&seeds)
        .map(|(bot, &seed)| {
            let mut e = entry(bot, seed);
            match api.create(plan.study, seed) {
                Ok(first) => {
                    e.session = first.session.clone();
                    e.condition = Some(first.condition);
                    (e, Some(first))
                }
                Err(err) => {
                    e.error = Some(err.to_string());
                    (e, None)
                }
            }
        })
        .collect();
    let sessions = created
        .into_par_iter()
        .map(|(mut e, first)| {
            let Some(first) = first else { return e };
            let mut api = match conn.connect() {
                Ok(api) => api,
                Err(err) => {
                    e.error = Some(err.to_string());
                    return e;
                }
            };
            let mut bot = Bot::new(e.bot.clone(), schedule.clone(), e.seed.rotate_left(17));
            let outcome = play(&mut api, &mut bot, first);
            e.status = outcome.status;
            e.bubbles = outcome.bubbles;
            e.error = outcome.error;
            if let Some(last) = outcome.last {
                e.last_week = last.week;
                e.profit = last.debrief.map(|d| d.profit);
                debug_assert!(e.status != SessionStatus::Completed || last.phase == SessionPhase::Closed);
            }
            e
        })
        .collect();
    Ok(Manifest { study: plan.study, seed: plan.seed, sessions })
}

/// Parses a bot profile such as `hoarder:2.0:24` or `reactor:1.5`.
pub fn parse_profile(s: &str, schedule: &Schedule) -> anyhow::Result<BotProfile> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize, default: f64| -> anyhow::Result<f64> {
        parts.get(i).map(|p| p.parse::<f64>().with_context(|| format!("bad number in {s:?}"))).unwrap_or(Ok(default))
    };
    Ok(match parts[0] {
        "follower" => BotProfile::Follower,
        "hoarder" => BotProfile::Hoarder {
            multiplier: num(1, 1.5)?,
            start_week: num(2, schedule.gameplay.0 as f64)? as u32,
        },
        "reactor" => BotProfile::Reactor { multiplier: num(1, 1.5)? },
        other => bail!("unknown profile {other:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gamette_core::session::{MemoryStore, ServiceConfig};

    #[test]
    fn mix_parsing() {
        let m: Mix = "follower=2, reactor=1,spike=1".parse().unwrap();
        assert_eq!(m, Mix { follower: 2, reactor: 1, spike: 1, ..Mix::default() });
        assert!("".parse::<Mix>().is_err());
        assert!("robot=3".parse::<Mix>().is_err());
        assert!("hoarder=x".parse::<Mix>().is_err());
    }

    #[test]
    fn profile_parsing() {
        let s = Schedule::default();
        assert_eq!(parse_profile("hoarder:2:24", &s).unwrap(), BotProfile::Hoarder { multiplier: 2.0, start_week: 24 });
        assert_eq!(parse_profile("reactor", &s).unwrap(), BotProfile::Reactor { multiplier: 1.5 });
        assert!(parse_profile("hoarder:q", &s).is_err());
    }

    #[test]
    fn followers_leave_eight_bubbles_each() {
        let svc = Arc::new(SessionService::new(MemoryStore::new(), ServiceConfig::default()).unwrap());
        let s = Schedule::default();
        let plan = CohortPlan::from_mix(StudyTag::Study1, 3, "follower=12".parse().unwrap(), 0.0, BubbleText::Template, &s);
        let m = run_cohort(&svc, &plan, &s).unwrap();
        assert_eq!(m.sessions.len(), 12);
        assert!(m.sessions.iter().all(|e| e.status == SessionStatus::Completed && e.profit.is_some()));
        assert_eq!(m.sessions.iter().map(|e| e.bubbles).sum::<usize>(), 96);
    }

    #[test]
    fn quirky_bots_are_flagged() {
        let svc = Arc::new(SessionService::new(MemoryStore::new(), ServiceConfig::default()).unwrap());
        let s = Schedule::default();
        let plan = CohortPlan::from_mix(StudyTag::Study2, 4, "reactor=1,spike=1,abandon=1".parse().unwrap(), 0.0, BubbleText::Silent, &s);
        let m = run_cohort(&svc, &plan, &s).unwrap();
        let abandoned: Vec<_> = m.sessions.iter().filter(|e| e.status == SessionStatus::Abandoned).collect();
        assert_eq!(abandoned.len(), 1);
        assert!(abandoned[0].outlier);
        assert_eq!(m.sessions.iter().filter(|e| e.outlier).count(), 2);
    }
}
