//! Weekly multi-agent flow simulator for the two-echelon drug supply chain.

mod config;
mod engine;
mod policy;
mod report;
mod topology;

pub use config::{
    AgentConfig, CostParams, DisruptionEvent, ScenarioConfig, StockTarget, TrustParams, SCENARIO_SCHEMA_VERSION,
};
pub use engine::{
    AgentState, Allocation, ControlledView, CustomerLine, ExternalDecision, Inbound, Ledger, OpenWeek,
    PendingOrder, SimParams, SimState,
};
pub use policy::{
    allocate, largest_remainder, largest_remainder_real, order_up_to_suggestion, split_demand, trust_update,
    AllocationPolicy, PositionView, SplitRule, TrustState,
};
pub use report::{AgentWeek, LinkWeek, WeekReport};
pub use topology::{AgentIdx, AgentSpec, LinkSpec, Network, NetworkTopology, Role};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("topology has a cycle through {0}")]
    Cycle(String),
    #[error("agent {0} has no valid supplier")]
    Orphan(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("fill rate {0} outside [0, 1]")]
    FillRate(f64),
    #[error("controlled agent needs an external decision")]
    MissingExternal,
    #[error("no agent is externally controlled")]
    UnexpectedExternal,
    #[error("stock is short of demand; an allocation is required")]
    MissingAllocation,
    #[error("allocation has {got} entries, expected {expected}")]
    AllocationShape { expected: usize, got: usize },
    #[error("allocation of {requested} exceeds on-hand inventory {on_hand}")]
    AllocationExceedsOnHand { requested: u64, on_hand: u64 },
    #[error("allocation exceeds what a customer is owed")]
    AllocationExceedsDemand,
    #[error("flow conservation violated for {agent} in week {week}")]
    Conservation { agent: String, week: u32 },
}
