//! Coded-comment datasets: ingest, rater resolution and grouping.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::codebook::{SaCode, SaLevel};
use super::contingency::ContingencyTable;
use super::profile::BehaviorProfile;
use super::AnalysisError;
use crate::protocol::{DisruptionSite, InfoLevel, Schedule, StudyTag};

/// Rater id given to comments produced by [`majority_vote`].
pub const MAJORITY_RATER: &str = "majority";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerRecord {
    pub player: String,
    pub study: StudyTag,
    pub disruption: Option<DisruptionSite>,
    pub info: InfoLevel,
    pub profile: Option<BehaviorProfile>,
}

/// One rater's coding of one comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedComment {
    pub player: String,
    pub week: u32,
    pub text: String,
    pub rater: String,
    /// Empty when the prompt went unanswered or nothing was codable.
    pub codes: Vec<SaCode>,
}

impl CodedComment {
    pub fn is_unanswered(&self) -> bool {
        self.text.trim().is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CodedRow {
    player: String,
    week: u32,
    text: String,
    rater: String,
    level: String,
    topic: String,
    description: String,
}

fn csv_err(e: csv::Error) -> AnalysisError {
    AnalysisError::Csv(e.to_string())
}

/// Reads the long format: one row per code tuple, or one row with empty
/// code columns for a comment without codes.
pub fn read_coded_comments<R: Read>(input: R, schedule: &Schedule) -> Result<Vec<CodedComment>, AnalysisError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out: Vec<CodedComment> = Vec::new();
    let mut index: HashMap<(String, u32, String), usize> = HashMap::new();
    for (line, row) in reader.deserialize::<CodedRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        if !schedule.is_meeting_week(row.week) {
            return Err(AnalysisError::Parse(format!("row {}: week {} is not a meeting week", line + 1, row.week)));
        }
        let blank = [&row.level, &row.topic, &row.description].iter().filter(|s| s.trim().is_empty()).count();
        let code = match blank {
            3 => None,
            0 => Some(SaCode::new(row.level.parse()?, row.topic.parse()?, row.description.parse()?)?),
            _ => return Err(AnalysisError::Parse(format!("row {}: partially filled code", line + 1))),
        };
        let key = (row.player.clone(), row.week, row.rater.clone());
        let i = *index.entry(key).or_insert_with(|| {
            out.push(CodedComment {
                player: row.player.clone(),
                week: row.week,
                text: row.text.clone(),
                rater: row.rater.clone(),
                codes: Vec::new(),
            });
            out.len() - 1
        });
        if let Some(code) = code {
            out[i].codes.push(code);
        }
    }
    Ok(out)
}

pub fn write_coded_comments<W: Write>(output: W, comments: &[CodedComment]) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(output);
    for c in comments {
        let base = |level: String, topic: String, description: String| CodedRow {
            player: c.player.clone(),
            week: c.week,
            text: c.text.clone(),
            rater: c.rater.clone(),
            level,
            topic,
            description,
        };
        if c.codes.is_empty() {
            w.serialize(base(String::new(), String::new(), String::new())).map_err(csv_err)?;
        }
        for code in &c.codes {
            w.serialize(base(code.level.to_string().to_lowercase(), code.topic.to_string(), code.description.to_string()))
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| AnalysisError::Csv(e.to_string()))
}

pub fn read_players<R: Read>(input: R) -> Result<Vec<PlayerRecord>, AnalysisError> {
    let mut reader = csv::Reader::from_reader(input);
    let players: Vec<PlayerRecord> = reader.deserialize().collect::<Result<_, _>>().map_err(csv_err)?;
    let mut seen = BTreeSet::new();
    for p in &players {
        if !seen.insert(&p.player) {
            return Err(AnalysisError::Parse(format!("player {} listed twice", p.player)));
        }
    }
    Ok(players)
}

pub fn write_players<W: Write>(output: W, players: &[PlayerRecord]) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(output);
    for p in players {
        w.serialize(p).map_err(csv_err)?;
    }
    w.flush().map_err(|e| AnalysisError::Csv(e.to_string()))
}

/// Resolves multiple raters per comment: a tuple survives when more than
/// half of the comment's raters assigned it.
pub fn majority_vote(comments: &[CodedComment]) -> Vec<CodedComment> {
    let mut groups: BTreeMap<(String, u32), Vec<&CodedComment>> = BTreeMap::new();
    for c in comments {
        groups.entry((c.player.clone(), c.week)).or_default().push(c);
    }
    groups
        .into_iter()
        .map(|((player, week), raters)| {
            let mut votes: BTreeMap<SaCode, BTreeSet<&str>> = BTreeMap::new();
            for c in &raters {
                for code in &c.codes {
                    votes.entry(*code).or_default().insert(c.rater.as_str());
                }
            }
            let n = raters.iter().map(|c| c.rater.as_str()).collect::<BTreeSet<_>>().len();
            let codes = votes.into_iter().filter(|(_, r)| 2 * r.len() > n).map(|(code, _)| code).collect();
            CodedComment { player, week, text: raters[0].text.clone(), rater: MAJORITY_RATER.into(), codes }
        })
        .collect()
}

/// Agreement matrix for Fleiss' kappa. Each comment is one item and its
/// category is the level of the rater's first tuple, or "uncoded".
pub fn rater_agreement_matrix(comments: &[CodedComment]) -> Result<Vec<Vec<u32>>, AnalysisError> {
    let mut items: BTreeMap<(String, u32), Vec<u32>> = BTreeMap::new();
    for c in comments {
        let row = items.entry((c.player.clone(), c.week)).or_insert_with(|| vec![0; 4]);
        let cat = c.codes.first().map_or(3, |code| code.level.index());
        row[cat] += 1;
    }
    Ok(items.into_values().collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub players: Vec<PlayerRecord>,
    /// One resolved coding per comment.
    pub comments: Vec<CodedComment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "by", content = "profile")]
pub enum Grouping {
    Disruption,
    Info,
    Profile,
    /// Info levels among players of one profile.
    InfoWithinProfile(BehaviorProfile),
}

fn info_label(study: StudyTag, info: InfoLevel) -> &'static str {
    match (study, info) {
        (StudyTag::Study2, InfoLevel::Partial) => "Info",
        _ => info.label(),
    }
}

impl Grouping {
    pub fn name(&self) -> String {
        match self {
            Grouping::Disruption => "disruption".into(),
            Grouping::Info => "info".into(),
            Grouping::Profile => "profile".into(),
            Grouping::InfoWithinProfile(p) => format!("info-within-{}", p.as_str()),
        }
    }

    /// Group label of a player; `Ok(None)` when the grouping leaves the
    /// player out.
    fn key(&self, p: &PlayerRecord) -> Result<Option<String>, AnalysisError> {
        let missing = |what: &str| AnalysisError::UnknownGroup(format!("player {} has no {what}", p.player));
        Ok(match self {
            Grouping::Disruption => Some(p.disruption.ok_or_else(|| missing("disruption site"))?.agent_id().into()),
            Grouping::Info => Some(info_label(p.study, p.info).into()),
            Grouping::Profile => Some(p.profile.ok_or_else(|| missing("profile"))?.label().into()),
            Grouping::InfoWithinProfile(want) => {
                if p.profile.ok_or_else(|| missing("profile"))? == *want {
                    Some(info_label(p.study, p.info).into())
                } else {
                    None
                }
            }
        })
    }

    fn order(&self) -> Vec<&'static str> {
        match self {
            Grouping::Disruption => vec!["MN1", "MN2"],
            Grouping::Info | Grouping::InfoWithinProfile(_) => vec!["Complete", "Partial", "Info", "No-Info"],
            Grouping::Profile => BehaviorProfile::ALL.iter().map(|p| p.label()).collect(),
        }
    }
}

impl Dataset {
    pub fn player(&self, id: &str) -> Option<&PlayerRecord> {
        self.players.iter().find(|p| p.player == id)
    }

    /// Group labels in display order with their player counts. Groups with
    /// no players are left out.
    pub fn group_sizes(&self, grouping: Grouping) -> Result<Vec<(String, usize)>, AnalysisError> {
        let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
        for p in &self.players {
            if let Some(k) = grouping.key(p)? {
                *sizes.entry(k).or_default() += 1;
            }
        }
        let mut out: Vec<(String, usize)> = grouping
            .order()
            .into_iter()
            .filter_map(|label| sizes.remove(label).map(|n| (label.to_string(), n)))
            .collect();
        out.extend(sizes);
        Ok(out)
    }

    /// Group of each comment's player, or None if the grouping skips it.
    pub fn comment_groups(&self, grouping: Grouping) -> Result<Vec<Option<String>>, AnalysisError> {
        let by_id: HashMap<&str, &PlayerRecord> = self.players.iter().map(|p| (p.player.as_str(), p)).collect();
        self.comments
            .iter()
            .map(|c| {
                let p = by_id
                    .get(c.player.as_str())
                    .ok_or_else(|| AnalysisError::UnknownGroup(format!("comment from unknown player {}", c.player)))?;
                grouping.key(p)
            })
            .collect()
    }
}

/// Counts code tuples per group and SA level.
pub fn build_contingency(dataset: &Dataset, grouping: Grouping) -> Result<ContingencyTable, AnalysisError> {
    if dataset.comments.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let groups = dataset.comment_groups(grouping)?;
    let rows: Vec<String> = dataset.group_sizes(grouping)?.into_iter().map(|(g, _)| g).collect();
    let mut counts = vec![vec![0u64; SaLevel::ALL.len()]; rows.len()];
    for (c, g) in dataset.comments.iter().zip(&groups) {
        let Some(g) = g else { continue };
        let i = rows.iter().position(|r| r == g).expect("group_sizes covers every key");
        for code in &c.codes {
            counts[i][code.level.index()] += 1;
        }
    }
    ContingencyTable::new(rows, SaLevel::ALL.iter().map(|l| l.label().to_string()).collect(), counts)
}
