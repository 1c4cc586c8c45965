use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use super::ProtocolError;
use crate::sim::{DisruptionEvent, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyTag {
    Study1,
    Study2,
}

impl FromStr for StudyTag {
    type Err = ProtocolError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "study1" | "1" => Ok(StudyTag::Study1),
            "study2" | "2" => Ok(StudyTag::Study2),
            _ => Err(ProtocolError::UnknownStudy(s.to_string())),
        }
    }
}

impl fmt::Display for StudyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyTag::Study1 => "study1",
            StudyTag::Study2 => "study2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DisruptionSite {
    #[serde(rename = "MN1")]
    Mn1,
    #[serde(rename = "MN2")]
    Mn2,
}

impl DisruptionSite {
    pub fn agent_id(self) -> &'static str {
        match self {
            DisruptionSite::Mn1 => "MN1",
            DisruptionSite::Mn2 => "MN2",
        }
    }
}

impl FromStr for DisruptionSite {
    type Err = ProtocolError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MN1" => Ok(DisruptionSite::Mn1),
            "MN2" => Ok(DisruptionSite::Mn2),
            _ => Err(ProtocolError::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoLevel {
    None,
    Partial,
    Complete,
}

impl InfoLevel {
    pub fn label(self) -> &'static str {
        match self {
            InfoLevel::None => "No-Info",
            InfoLevel::Partial => "Partial",
            InfoLevel::Complete => "Complete",
        }
    }
}

impl FromStr for InfoLevel {
    type Err = ProtocolError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "no-info" | "no" => Ok(InfoLevel::None),
            "partial" | "info" | "yes" => Ok(InfoLevel::Partial),
            "complete" => Ok(InfoLevel::Complete),
            _ => Err(ProtocolError::UnknownLabel(s.to_string())),
        }
    }
}

/// One cell of the experimental design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub disruption: DisruptionSite,
    pub info: InfoLevel,
    pub study: StudyTag,
}

impl Condition {
    /// The design cells of a study, in a fixed order.
    pub fn all(study: StudyTag) -> Vec<Condition> {
        let infos: &[InfoLevel] = match study {
            StudyTag::Study1 => &[InfoLevel::None, InfoLevel::Partial, InfoLevel::Complete],
            StudyTag::Study2 => &[InfoLevel::None, InfoLevel::Partial],
        };
        let sites: &[DisruptionSite] = match study {
            StudyTag::Study1 => &[DisruptionSite::Mn1, DisruptionSite::Mn2],
            StudyTag::Study2 => &[DisruptionSite::Mn1],
        };
        infos
            .iter()
            .flat_map(|&info| sites.iter().map(move |&disruption| Condition { disruption, info, study }))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if Condition::all(self.study).contains(self) {
            Ok(())
        } else {
            Err(ProtocolError::InvalidCondition(*self))
        }
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.disruption.agent_id(), self.info.label())
    }

    /// Scenario with this condition's disruption placed on the calendar.
    pub fn apply(&self, base: &ScenarioConfig, schedule: &Schedule) -> ScenarioConfig {
        let mut cfg = base.clone();
        cfg.disruptions = vec![DisruptionEvent {
            target: self.disruption.agent_id().to_string(),
            start_week: schedule.disruption.0,
            end_week: schedule.disruption.1,
            capacity_fraction: schedule.disruption_capacity_fraction,
        }];
        cfg
    }
}

/// Draws a condition uniformly from the study's design cells.
pub fn assign_condition<R: Rng + ?Sized>(rng: &mut R, study: StudyTag) -> Condition {
    let cells = Condition::all(study);
    cells[rng.gen_range(0..cells.len())]
}

/// Condition for the `index`-th draw under `seed`; a pure function of both.
pub fn assign_condition_at(seed: u64, index: u64, study: StudyTag) -> Condition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    assign_condition(&mut rng, study)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_cells() {
        assert_eq!(Condition::all(StudyTag::Study1).len(), 6);
        let s2 = Condition::all(StudyTag::Study2);
        assert_eq!(s2.len(), 2);
        assert!(s2.iter().all(|c| c.disruption == DisruptionSite::Mn1 && c.info != InfoLevel::Complete));
    }

    #[test]
    fn study1_is_roughly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = std::collections::BTreeMap::new();
        let n = 60_000;
        for _ in 0..n {
            *counts.entry(assign_condition(&mut rng, StudyTag::Study1)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for c in counts.values() {
            let p = *c as f64 / n as f64;
            assert!((p - 1.0 / 6.0).abs() < 0.01, "share {p}");
        }
    }

    #[test]
    fn study2_only_draws_mn1_none_or_partial() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let c = assign_condition(&mut rng, StudyTag::Study2);
            assert_eq!(c.disruption, DisruptionSite::Mn1);
            assert!(matches!(c.info, InfoLevel::None | InfoLevel::Partial));
        }
    }

    #[test]
    fn seeded_assignment_replays() {
        let a: Vec<_> = (0..50).map(|i| assign_condition_at(42, i, StudyTag::Study1)).collect();
        let b: Vec<_> = (0..50).map(|i| assign_condition_at(42, i, StudyTag::Study1)).collect();
        assert_eq!(a, b);
        let c: Vec<_> = (0..50).map(|i| assign_condition_at(43, i, StudyTag::Study1)).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn unknown_study_tag() {
        assert!(matches!("study3".parse::<StudyTag>(), Err(ProtocolError::UnknownStudy(_))));
        assert_eq!("Study2".parse::<StudyTag>().unwrap(), StudyTag::Study2);
    }

    #[test]
    fn invalid_study2_condition() {
        let c = Condition { disruption: DisruptionSite::Mn2, info: InfoLevel::None, study: StudyTag::Study2 };
        assert!(c.validate().is_err());
    }
}
