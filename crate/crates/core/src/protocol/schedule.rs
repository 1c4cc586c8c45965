use serde::{Deserialize, Serialize};

/// Event calendar of a session, in simulation weeks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Inclusive.
    pub tutorial: (u32, u32),
    /// Inclusive.
    pub gameplay: (u32, u32),
    pub meeting_weeks: Vec<u32>,
    pub notification_week: u32,
    /// Inclusive.
    pub disruption: (u32, u32),
    pub disruption_capacity_fraction: f64,
    /// Inclusive.
    pub shortage: (u32, u32),
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            tutorial: (17, 20),
            gameplay: (21, 55),
            meeting_weeks: (0..8).map(|k| 24 + 4 * k).collect(),
            notification_week: 28,
            disruption: (28, 33),
            disruption_capacity_fraction: 0.05,
            shortage: (32, 36),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Tutorial,
    Gameplay,
    Finished,
}

impl Schedule {
    pub fn is_meeting_week(&self, week: u32) -> bool {
        self.meeting_weeks.contains(&week)
    }

    pub fn stage(&self, week: u32) -> Stage {
        if week <= self.tutorial.1 {
            Stage::Tutorial
        } else if week <= self.gameplay.1 {
            Stage::Gameplay
        } else {
            Stage::Finished
        }
    }

    pub fn first_week(&self) -> u32 {
        self.tutorial.0
    }

    pub fn last_week(&self) -> u32 {
        self.gameplay.1
    }

    pub fn gameplay_weeks(&self) -> std::ops::RangeInclusive<u32> {
        self.gameplay.0..=self.gameplay.1
    }

    /// Meeting weeks are evenly spaced every four weeks inside gameplay and
    /// the disruption is announced the week it starts.
    pub fn is_consistent(&self) -> bool {
        let spaced = self.meeting_weeks.windows(2).all(|w| w[1] == w[0] + 4);
        let inside = self.meeting_weeks.iter().all(|w| self.gameplay_weeks().contains(w));
        spaced && inside && self.notification_week == self.disruption.0 && self.disruption.0 <= self.disruption.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_calendar() {
        let s = Schedule::default();
        assert_eq!(s.meeting_weeks, vec![24, 28, 32, 36, 40, 44, 48, 52]);
        assert!(s.is_consistent());
        assert_eq!(s.gameplay_weeks().count(), 35);
        assert_eq!(s.stage(20), Stage::Tutorial);
        assert_eq!(s.stage(21), Stage::Gameplay);
        assert_eq!(s.stage(56), Stage::Finished);
    }
}
