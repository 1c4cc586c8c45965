//! Situation-awareness codebook for thought-bubble comments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaLevel {
    Perception,
    Comprehension,
    Projection,
}

impl SaLevel {
    pub const ALL: [SaLevel; 3] = [SaLevel::Perception, SaLevel::Comprehension, SaLevel::Projection];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            SaLevel::Perception => "Perception",
            SaLevel::Comprehension => "Comprehension",
            SaLevel::Projection => "Projection",
        }
    }
}

macro_rules! labeled_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = AnalysisError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let s = s.trim();
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str().eq_ignore_ascii_case(s))
                    .ok_or_else(|| AnalysisError::Parse(format!("unknown {} {s:?}", stringify!($name))))
            }
        }
    };
}

labeled_enum!(Topic {
    InventoryCost => "inventory cost",
    BacklogCost => "backlog cost",
    Costs => "costs",
    Profit => "profit",
    Inventory => "inventory",
    Demand => "demand",
    Backlog => "backlog",
    Order => "order",
    General => "general",
    SupplyLine => "supply line",
    Allocation => "allocation",
});

labeled_enum!(Description {
    Increase => "increase",
    Decrease => "decrease",
    Consistent => "consistent",
    Zero => "zero",
    OverOrder => "over-order",
    UnderOrder => "under-order",
    Positive => "positive",
    Negative => "negative",
    Neutral => "neutral",
    Uncertain => "uncertain",
    Improve => "improve",
    AnticipateProblem => "anticipate problem/uncertainty",
    Constant => "constant",
    Proportionally => "proportionally",
    HigherDeliveryRate => "HC with higher delivery rate",
    Hc2 => "HC2",
});

impl FromStr for SaLevel {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "perception" => Ok(SaLevel::Perception),
            "comprehension" => Ok(SaLevel::Comprehension),
            "projection" => Ok(SaLevel::Projection),
            other => Err(AnalysisError::Parse(format!("unknown SA level {other:?}"))),
        }
    }
}

impl fmt::Display for SaLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Topics and descriptions admissible at each level.
pub fn codebook(level: SaLevel) -> (&'static [Topic], &'static [Description]) {
    use Description as D;
    use Topic as T;
    match level {
        SaLevel::Perception => (
            &[T::InventoryCost, T::BacklogCost, T::Costs, T::Profit, T::Inventory, T::Demand, T::Backlog, T::Order],
            &[D::Increase, D::Decrease, D::Consistent, D::Zero, D::OverOrder, D::UnderOrder],
        ),
        SaLevel::Comprehension => (
            &[T::General, T::Inventory, T::Demand, T::Backlog, T::SupplyLine, T::Order],
            &[D::Positive, D::Negative, D::Neutral, D::Uncertain],
        ),
        SaLevel::Projection => (
            &[T::General, T::Profit, T::Inventory, T::Demand, T::Backlog, T::Order, T::Allocation],
            &[
                D::Improve,
                D::AnticipateProblem,
                D::Increase,
                D::Decrease,
                D::Constant,
                D::Uncertain,
                D::Proportionally,
                D::HigherDeliveryRate,
                D::Hc2,
            ],
        ),
    }
}

/// One <level, topic, description> tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SaCode {
    pub level: SaLevel,
    pub topic: Topic,
    pub description: Description,
}

impl SaCode {
    pub fn new(level: SaLevel, topic: Topic, description: Description) -> Result<SaCode, AnalysisError> {
        let code = SaCode { level, topic, description };
        if code.is_valid() {
            Ok(code)
        } else {
            Err(AnalysisError::InvalidCode(code.to_string()))
        }
    }

    pub fn is_valid(&self) -> bool {
        let (topics, descriptions) = codebook(self.level);
        topics.contains(&self.topic) && descriptions.contains(&self.description)
    }

    /// Every tuple the codebook admits.
    pub fn all_valid() -> Vec<SaCode> {
        SaLevel::ALL
            .iter()
            .flat_map(|&level| {
                let (topics, descriptions) = codebook(level);
                topics
                    .iter()
                    .flat_map(move |&topic| descriptions.iter().map(move |&description| SaCode { level, topic, description }))
            })
            .collect()
    }
}

impl fmt::Display for SaCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.level, self.topic, self.description)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codebook_membership() {
        assert!(SaCode::new(SaLevel::Perception, Topic::InventoryCost, Description::Increase).is_ok());
        assert!(SaCode::new(SaLevel::Comprehension, Topic::General, Description::Positive).is_ok());
        assert!(SaCode::new(SaLevel::Projection, Topic::Allocation, Description::Hc2).is_ok());
        assert!(SaCode::new(SaLevel::Perception, Topic::General, Description::Positive).is_err());
        assert!(SaCode::new(SaLevel::Comprehension, Topic::Profit, Description::Positive).is_err());
        assert_eq!(SaCode::all_valid().len(), 8 * 6 + 6 * 4 + 7 * 9);
    }

    #[test]
    fn labels_round_trip() {
        for t in Topic::ALL {
            assert_eq!(t.as_str().parse::<Topic>().unwrap(), *t);
        }
        for d in Description::ALL {
            assert_eq!(d.as_str().parse::<Description>().unwrap(), *d);
        }
        assert_eq!("PROJECTION".parse::<SaLevel>().unwrap(), SaLevel::Projection);
    }
}
