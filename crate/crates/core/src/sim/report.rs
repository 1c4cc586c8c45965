use serde::{Deserialize, Serialize};

use super::topology::Role;
use super::SimError;

/// One agent's flows and cost deltas for a single week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentWeek {
    pub agent: String,
    pub role: Role,
    pub on_hand_start: u64,
    pub receipts: u64,
    /// New orders (or patient demand) that arrived this week.
    pub demand: u64,
    pub shipments: u64,
    pub sales: u64,
    pub on_hand_end: u64,
    pub backlog_start: u64,
    pub backlog_end: u64,
    /// Units ordered from suppliers, or admitted into production.
    pub order: u64,
    pub suggestion: u64,
    /// Production requested before the capacity clamp (manufacturers).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub production_requested: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u64>,
    pub revenue: f64,
    pub holding_cost: f64,
    pub stockout_cost: f64,
}

impl AgentWeek {
    pub fn profit(&self) -> f64 {
        self.revenue - self.holding_cost - self.stockout_cost
    }

    pub fn backlog_change(&self) -> i64 {
        self.backlog_end as i64 - self.backlog_start as i64
    }

    pub fn conserves_flow(&self) -> bool {
        self.on_hand_end as i128 - self.on_hand_start as i128 == self.receipts as i128 - self.shipments as i128
    }
}

/// Flow along one supplier -> customer link in a week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkWeek {
    pub supplier: String,
    pub customer: String,
    /// Order the customer placed with the supplier this week.
    pub ordered: u64,
    /// What the supplier owed the customer when it shipped.
    pub owed: u64,
    pub shipped: u64,
    pub fill_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekReport {
    pub week: u32,
    pub agents: Vec<AgentWeek>,
    pub links: Vec<LinkWeek>,
}

impl WeekReport {
    pub fn agent(&self, id: &str) -> Option<&AgentWeek> {
        self.agents.iter().find(|a| a.agent == id)
    }

    pub fn link(&self, supplier: &str, customer: &str) -> Option<&LinkWeek> {
        self.links.iter().find(|l| l.supplier == supplier && l.customer == customer)
    }

    /// Same flows, ignoring which week they happened in.
    pub fn same_flows(&self, other: &WeekReport) -> bool {
        self.agents == other.agents && self.links == other.links
    }

    pub fn check_conservation(&self) -> Result<(), SimError> {
        match self.agents.iter().find(|a| !a.conserves_flow()) {
            Some(a) => Err(SimError::Conservation { agent: a.agent.clone(), week: self.week }),
            None => Ok(()),
        }
    }
}
