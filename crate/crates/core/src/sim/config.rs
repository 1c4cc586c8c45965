//! Scenario files: the versioned, TOML-encoded description of a network,
//! its policies, demand, costs and disruption calendar.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::policy::{AllocationPolicy, SplitRule};
use super::topology::{AgentSpec, LinkSpec, NetworkTopology, Role};
use super::SimError;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Target inventory position for the order-up-to rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StockTarget {
    /// Fixed level S in units.
    Units(u64),
    /// S expressed as weeks of steady-state throughput; two of those weeks
    /// are always in the pipeline.
    CoverWeeks(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub id: String,
    pub role: Role,
    pub stock_target: StockTarget,
    /// Baseline weekly production capacity (manufacturers only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u64>,
    /// Constant weekly patient demand (health centers only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationPolicy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub holding: f64,
    pub stockout: f64,
    pub revenue: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams { holding: 1.0, stockout: 10.0, revenue: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustParams {
    pub lambda: f64,
    pub floor: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        TrustParams { lambda: 0.2, floor: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionEvent {
    pub target: String,
    pub start_week: u32,
    /// Inclusive.
    pub end_week: u32,
    pub capacity_fraction: f64,
}

impl DisruptionEvent {
    pub fn covers(&self, week: u32) -> bool {
        (self.start_week..=self.end_week).contains(&week)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub start_week: u32,
    /// Agent that may be driven by an outside decision maker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controllable: Option<String>,
    #[serde(default)]
    pub costs: CostParams,
    #[serde(default)]
    pub trust: TrustParams,
    pub agents: Vec<AgentConfig>,
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub disruptions: Vec<DisruptionEvent>,
}

impl Default for ScenarioConfig {
    /// Same content as `scenarios/default.toml`.
    fn default() -> Self {
        let mn = |id: &str| AgentConfig {
            id: id.into(),
            role: Role::Manufacturer,
            stock_target: StockTarget::CoverWeeks(4),
            capacity: Some(100),
            demand: None,
            split: None,
            allocation: None,
        };
        let ws = |id: &str| AgentConfig {
            id: id.into(),
            role: Role::Wholesaler,
            stock_target: StockTarget::CoverWeeks(3),
            capacity: None,
            demand: None,
            split: None,
            allocation: Some(AllocationPolicy::Proportional),
        };
        let hc = |id: &str, split| AgentConfig {
            id: id.into(),
            role: Role::HealthCenter,
            stock_target: StockTarget::CoverWeeks(3),
            capacity: None,
            demand: Some(50),
            split: Some(split),
            allocation: None,
        };
        ScenarioConfig {
            schema_version: SCENARIO_SCHEMA_VERSION,
            seed: 2023,
            start_week: 17,
            controllable: Some("WS1".into()),
            costs: CostParams::default(),
            trust: TrustParams::default(),
            agents: vec![
                mn("MN1"),
                mn("MN2"),
                ws("WS1"),
                ws("WS2"),
                hc("HC1", SplitRule::Trust),
                hc("HC2", SplitRule::Equal),
            ],
            links: NetworkTopology::two_by_two_by_two().links,
            disruptions: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        if cfg.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(SimError::SchemaVersion { found: cfg.schema_version, expected: SCENARIO_SCHEMA_VERSION });
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable as TOML")
    }

    pub fn topology(&self) -> NetworkTopology {
        NetworkTopology {
            agents: self.agents.iter().map(|a| AgentSpec { id: a.id.clone(), role: a.role }).collect(),
            links: self.links.clone(),
        }
    }

    pub fn agent(&self, id: &str) -> Option<&AgentConfig> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn agent_mut(&mut self, id: &str) -> Option<&mut AgentConfig> {
        self.agents.iter_mut().find(|a| a.id == id)
    }

    /// Sets the same constant demand at every health center.
    pub fn with_uniform_demand(mut self, demand: u64) -> Self {
        for a in self.agents.iter_mut().filter(|a| a.role == Role::HealthCenter) {
            a.demand = Some(demand);
        }
        self
    }

    pub fn with_disruption(mut self, event: DisruptionEvent) -> Self {
        self.disruptions.push(event);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_file_matches_builtin_default() {
        let text = include_str!("../../../../scenarios/default.toml");
        let parsed = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(parsed, ScenarioConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig::default().with_disruption(DisruptionEvent {
            target: "MN2".into(),
            start_week: 28,
            end_week: 33,
            capacity_fraction: 0.05,
        });
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let text = ScenarioConfig::default().to_toml_string().replace("schema_version = 1", "schema_version = 7");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&text),
            Err(SimError::SchemaVersion { found: 7, .. })
        ));
    }

    #[test]
    fn negative_quantity_is_a_parse_error() {
        let text = ScenarioConfig::default().to_toml_string().replace("capacity = 100", "capacity = -100");
        assert!(matches!(ScenarioConfig::from_toml_str(&text), Err(SimError::Parse(_))));
    }
}
