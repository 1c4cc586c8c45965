//! Behavioral profiling from ordering decisions: deviation from the order
//! suggestion, HMM response modes, k-medoids over mode sequences, and
//! cluster labeling.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::hmm::{FitOptions, Hmm};
use super::AnalysisError;
use crate::protocol::{Condition, Schedule};
use crate::session::{replay, DecisionRecord, Session, SessionEvent, SessionPhase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BehaviorProfile {
    Hoarder,
    Reactor,
    Follower,
}

impl BehaviorProfile {
    pub const ALL: [BehaviorProfile; 3] = [BehaviorProfile::Hoarder, BehaviorProfile::Reactor, BehaviorProfile::Follower];

    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorProfile::Hoarder => "hoarder",
            BehaviorProfile::Reactor => "reactor",
            BehaviorProfile::Follower => "follower",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BehaviorProfile::Hoarder => "Hoarder",
            BehaviorProfile::Reactor => "Reactor",
            BehaviorProfile::Follower => "Follower",
        }
    }
}

impl fmt::Display for BehaviorProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BehaviorProfile {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BehaviorProfile::ALL
            .iter()
            .copied()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| AnalysisError::Parse(format!("unknown profile {s:?}")))
    }
}

/// Response mode relative to the order suggestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Under = 0,
    Follow = 1,
    Over = 2,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Under, Mode::Follow, Mode::Over];

    pub fn symbol(self) -> usize {
        self as usize
    }

    pub fn from_deviation(dev: f64, threshold: f64) -> Mode {
        if dev > threshold {
            Mode::Over
        } else if dev < -threshold {
            Mode::Under
        } else {
            Mode::Follow
        }
    }
}

/// A player's ordering decisions, as recovered from a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub player: String,
    pub condition: Option<Condition>,
    pub decisions: Vec<DecisionRecord>,
    /// Whether the player reached the end of gameplay.
    pub complete: bool,
}

impl DecisionLog {
    pub fn from_session(s: &Session) -> DecisionLog {
        DecisionLog {
            player: s.id().to_string(),
            condition: Some(s.condition()),
            decisions: s.decisions().to_vec(),
            complete: matches!(s.phase(), SessionPhase::Survey | SessionPhase::Debrief | SessionPhase::Closed),
        }
    }

    pub fn from_events(events: &[SessionEvent]) -> Result<DecisionLog, AnalysisError> {
        let s = replay(events).map_err(|e| AnalysisError::Parse(format!("session log: {e}")))?;
        Ok(DecisionLog::from_session(&s))
    }

    fn gameplay(&self, schedule: &Schedule) -> impl Iterator<Item = &DecisionRecord> {
        let weeks = schedule.gameplay_weeks();
        self.decisions.iter().filter(move |d| weeks.contains(&d.week))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSequence {
    pub player: String,
    pub weeks: Vec<u32>,
    /// (order - suggestion) / max(1, suggestion)
    pub deviations: Vec<f64>,
    pub observed: Vec<Mode>,
    /// Modes after HMM decoding; empty until profiled.
    pub decoded: Vec<Mode>,
}

pub fn relative_deviation(units: u64, suggestion: u64) -> f64 {
    (units as f64 - suggestion as f64) / (suggestion.max(1) as f64)
}

pub fn deviation_sequence(log: &DecisionLog, schedule: &Schedule, threshold: f64) -> DeviationSequence {
    let (weeks, deviations): (Vec<u32>, Vec<f64>) =
        log.gameplay(schedule).map(|d| (d.week, relative_deviation(d.units, d.suggestion))).unzip();
    let observed = deviations.iter().map(|&d| Mode::from_deviation(d, threshold)).collect();
    DeviationSequence { player: log.player.clone(), weeks, deviations, observed, decoded: Vec::new() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExclusionReason {
    ExtremeOrder { week: u32, units: u64, suggestion: u64 },
    Incomplete { gameplay_weeks: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OutlierReport {
    pub excluded: Vec<(String, ExclusionReason)>,
}

impl OutlierReport {
    pub fn excluded_players(&self) -> BTreeSet<&str> {
        self.excluded.iter().map(|(p, _)| p.as_str()).collect()
    }
}

/// Orders above this multiple of max(1, suggestion) mark a player as an outlier.
pub const EXTREME_ORDER_FACTOR: u64 = 10;

/// Drops players with an extreme order or an unfinished game.
pub fn filter_outliers(logs: Vec<DecisionLog>, schedule: &Schedule) -> (Vec<DecisionLog>, OutlierReport) {
    let expected = schedule.gameplay_weeks().count();
    let mut report = OutlierReport::default();
    let mut kept = Vec::new();
    for log in logs {
        let played = log.gameplay(schedule).count();
        let extreme = log.decisions.iter().find(|d| d.units > EXTREME_ORDER_FACTOR * d.suggestion.max(1));
        if let Some(d) = extreme {
            report.excluded.push((
                log.player.clone(),
                ExclusionReason::ExtremeOrder { week: d.week, units: d.units, suggestion: d.suggestion },
            ));
        } else if !log.complete || played < expected {
            report.excluded.push((log.player.clone(), ExclusionReason::Incomplete { gameplay_weeks: played }));
        } else {
            kept.push(log);
        }
    }
    (kept, report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    /// Relative deviation inside which an order counts as following.
    pub threshold: f64,
    pub hmm: FitOptions,
    pub clusters: usize,
    pub min_weeks: usize,
    /// Cluster mean follow fraction at or above which it is labeled Follower.
    pub follow_fraction: f64,
    /// A cluster whose pre-notification over-order rate is below this share
    /// of its post-notification rate is labeled Reactor.
    pub reactor_concentration: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            threshold: 0.05,
            hmm: FitOptions::default(),
            clusters: 3,
            min_weeks: 20,
            follow_fraction: 0.8,
            reactor_concentration: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub medoid: String,
    pub members: usize,
    pub over_before_notice: f64,
    pub over_after_notice: f64,
    pub follow: f64,
    pub profile: BehaviorProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerProfile {
    pub player: String,
    pub cluster: usize,
    pub profile: BehaviorProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilingReport {
    pub players: Vec<PlayerProfile>,
    pub clusters: Vec<ClusterSummary>,
    pub sequences: Vec<DeviationSequence>,
    pub hmm: Hmm<f64>,
    /// Response mode each hidden state stands for.
    pub state_modes: Vec<Mode>,
    pub log_likelihood: f64,
}

impl ProfilingReport {
    pub fn profile_of(&self, player: &str) -> Option<BehaviorProfile> {
        self.players.iter().find(|p| p.player == player).map(|p| p.profile)
    }

    /// Share of players whose label matches `truth`.
    pub fn accuracy(&self, truth: &HashMap<String, BehaviorProfile>) -> f64 {
        if self.players.is_empty() {
            return 0.0;
        }
        let hits = self.players.iter().filter(|p| truth.get(&p.player) == Some(&p.profile)).count();
        hits as f64 / self.players.len() as f64
    }
}

fn hamming(a: &[Mode], b: &[Mode]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len())
}

/// Partitioning around medoids with the greedy BUILD start. Returns the
/// medoid indices and each point's cluster.
pub fn k_medoids(dist: &[Vec<usize>], k: usize) -> (Vec<usize>, Vec<usize>) {
    let n = dist.len();
    let k = k.min(n);
    if k == 0 {
        return (Vec::new(), Vec::new());
    }
    let cost = |medoids: &[usize]| -> usize {
        (0..n).map(|i| medoids.iter().map(|&m| dist[i][m]).min().unwrap_or(0)).sum()
    };
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    while medoids.len() < k {
        let best = (0..n)
            .filter(|i| !medoids.contains(i))
            .min_by_key(|&c| {
                let mut trial = medoids.clone();
                trial.push(c);
                (cost(&trial), c)
            })
            .expect("k <= n");
        medoids.push(best);
    }
    let mut current = cost(&medoids);
    loop {
        let mut best_swap: Option<(usize, usize, usize)> = None;
        for slot in 0..k {
            for cand in (0..n).filter(|c| !medoids.contains(c)) {
                let mut trial = medoids.clone();
                trial[slot] = cand;
                let c = cost(&trial);
                if c < current && best_swap.is_none_or(|(_, _, b)| c < b) {
                    best_swap = Some((slot, cand, c));
                }
            }
        }
        match best_swap {
            Some((slot, cand, c)) => {
                medoids[slot] = cand;
                current = c;
            }
            None => break,
        }
    }
    let assign = (0..n)
        .map(|i| (0..k).min_by_key(|&j| (dist[i][medoids[j]], j)).expect("k >= 1"))
        .collect();
    (medoids, assign)
}

fn rate(modes: &[Mode], weeks: &[u32], keep: impl Fn(u32) -> bool, want: Mode) -> Option<f64> {
    let picked: Vec<Mode> = modes.iter().zip(weeks).filter(|(_, &w)| keep(w)).map(|(&m, _)| m).collect();
    if picked.is_empty() {
        None
    } else {
        Some(picked.iter().filter(|&&m| m == want).count() as f64 / picked.len() as f64)
    }
}

/// The full profiling pipeline. Logs should be outlier-filtered first.
pub fn profile_players(
    logs: &[DecisionLog],
    schedule: &Schedule,
    opts: &ProfileOptions,
) -> Result<ProfilingReport, AnalysisError> {
    if logs.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut sequences: Vec<DeviationSequence> =
        logs.iter().map(|l| deviation_sequence(l, schedule, opts.threshold)).collect();
    if let Some(s) = sequences.iter().find(|s| s.observed.len() < opts.min_weeks) {
        return Err(AnalysisError::TooShort { player: s.player.clone(), weeks: s.observed.len(), needed: opts.min_weeks });
    }
    let symbols: Vec<Vec<usize>> = sequences.iter().map(|s| s.observed.iter().map(|m| m.symbol()).collect()).collect();
    let fit = Hmm::<f64>::fit(&symbols, &FitOptions { symbols: Mode::ALL.len(), ..opts.hmm })?;
    let state_modes: Vec<Mode> = fit
        .hmm
        .emission
        .iter()
        .map(|row| {
            let k = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a))).unwrap_or(0);
            Mode::ALL[k]
        })
        .collect();
    let seen: BTreeSet<Mode> = sequences.iter().flat_map(|s| s.observed.iter().copied()).collect();
    let expressible: BTreeSet<Mode> = state_modes.iter().copied().collect();
    if seen.len() > 1 && expressible.len() < 2 {
        return Err(AnalysisError::Degenerate(format!(
            "every hidden state collapsed onto {:?} although the data show {} modes",
            state_modes[0],
            seen.len()
        )));
    }
    for (s, sym) in sequences.iter_mut().zip(&symbols) {
        let (path, _) = fit.hmm.viterbi(sym)?;
        s.decoded = path.into_iter().map(|st| state_modes[st]).collect();
    }
    let n = sequences.len();
    let dist: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).map(|j| hamming(&sequences[i].decoded, &sequences[j].decoded)).collect()).collect();
    let distinct = sequences.iter().map(|s| s.decoded.clone()).collect::<BTreeSet<_>>().len();
    let (medoids, assign) = k_medoids(&dist, opts.clusters.min(distinct));
    let notice = schedule.notification_week;
    let clusters: Vec<ClusterSummary> = medoids
        .iter()
        .enumerate()
        .map(|(c, &m)| {
            let members: Vec<&DeviationSequence> = (0..n).filter(|&i| assign[i] == c).map(|i| &sequences[i]).collect();
            let mean = |f: &dyn Fn(&DeviationSequence) -> Option<f64>| {
                let v: Vec<f64> = members.iter().filter_map(|s| f(s)).collect();
                if v.is_empty() {
                    0.0
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            let before = mean(&|s| rate(&s.decoded, &s.weeks, |w| w < notice, Mode::Over));
            let after = mean(&|s| rate(&s.decoded, &s.weeks, |w| w >= notice, Mode::Over));
            let follow = mean(&|s| rate(&s.decoded, &s.weeks, |_| true, Mode::Follow));
            let profile = if follow >= opts.follow_fraction {
                BehaviorProfile::Follower
            } else if before < opts.reactor_concentration * after {
                BehaviorProfile::Reactor
            } else {
                BehaviorProfile::Hoarder
            };
            ClusterSummary {
                medoid: sequences[m].player.clone(),
                members: members.len(),
                over_before_notice: before,
                over_after_notice: after,
                follow,
                profile,
            }
        })
        .collect();
    let players = sequences
        .iter()
        .zip(&assign)
        .map(|(s, &c)| PlayerProfile { player: s.player.clone(), cluster: c, profile: clusters[c].profile })
        .collect();
    Ok(ProfilingReport {
        players,
        clusters,
        sequences,
        hmm: fit.hmm,
        state_modes,
        log_likelihood: fit.log_likelihood,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(player: &str, order: impl Fn(u32, u64) -> u64) -> DecisionLog {
        let decisions = (17..=55)
            .map(|week| {
                let suggestion = 25;
                DecisionRecord { week, units: order(week, suggestion), suggestion }
            })
            .collect();
        DecisionLog { player: player.into(), condition: None, decisions, complete: true }
    }

    #[test]
    fn deviation_uses_floor_of_one() {
        assert_eq!(relative_deviation(3, 0), 3.0);
        assert_eq!(relative_deviation(30, 20), 0.5);
        assert_eq!(Mode::from_deviation(0.05, 0.05), Mode::Follow);
        assert_eq!(Mode::from_deviation(-0.2, 0.05), Mode::Under);
    }

    #[test]
    fn followers_only() {
        let logs: Vec<_> = (0..5).map(|i| log(&format!("f{i}"), |_, s| s)).collect();
        let r = profile_players(&logs, &Schedule::default(), &ProfileOptions::default()).unwrap();
        assert!(r.players.iter().all(|p| p.profile == BehaviorProfile::Follower));
        assert_eq!(r.sequences[0].observed.len(), 35);
    }

    #[test]
    fn outlier_rules() {
        let clean = log("ok", |_, s| s);
        let wild = log("wild", |w, s| if w == 40 { 1000 * s } else { s });
        let mut short = log("short", |_, s| s);
        short.complete = false;
        let (kept, report) = filter_outliers(vec![clean, wild, short], &Schedule::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(
            report.excluded[0],
            ("wild".into(), ExclusionReason::ExtremeOrder { week: 40, units: 25_000, suggestion: 25 })
        );
        assert!(matches!(report.excluded[1].1, ExclusionReason::Incomplete { .. }));
    }

    #[test]
    fn too_short_is_an_error() {
        let mut l = log("p", |_, s| s);
        l.decisions.truncate(10);
        assert!(matches!(
            profile_players(&[l], &Schedule::default(), &ProfileOptions::default()),
            Err(AnalysisError::TooShort { .. })
        ));
    }

    #[test]
    fn k_medoids_separates_obvious_groups() {
        let pts = [0i64, 1, 2, 50, 51, 52, 100, 101];
        let dist: Vec<Vec<usize>> =
            pts.iter().map(|a| pts.iter().map(|b| (a - b).unsigned_abs() as usize).collect()).collect();
        let (_, assign) = k_medoids(&dist, 3);
        assert_eq!(assign[0], assign[2]);
        assert_eq!(assign[3], assign[5]);
        assert_eq!(assign[6], assign[7]);
        assert_ne!(assign[0], assign[3]);
        assert_ne!(assign[3], assign[6]);
    }
}
