use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Manufacturer,
    Wholesaler,
    HealthCenter,
}

/// Index of an agent inside a validated [`NetworkTopology`].
///
/// Indices follow the order agents are declared in, which is also the
/// tie-break order for every rounding decision in the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentIdx(pub usize);

impl fmt::Display for AgentIdx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    pub role: Role,
}

/// Directed supplier -> customer edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub supplier: String,
    pub customer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub agents: Vec<AgentSpec>,
    pub links: Vec<LinkSpec>,
}

impl NetworkTopology {
    /// Two manufacturers, two wholesalers, two health centers. Each
    /// wholesaler has a single manufacturer; both health centers order from
    /// both wholesalers.
    pub fn two_by_two_by_two() -> Self {
        let agent = |id: &str, role| AgentSpec { id: id.to_string(), role };
        let link = |s: &str, c: &str| LinkSpec { supplier: s.to_string(), customer: c.to_string() };
        NetworkTopology {
            agents: vec![
                agent("MN1", Role::Manufacturer),
                agent("MN2", Role::Manufacturer),
                agent("WS1", Role::Wholesaler),
                agent("WS2", Role::Wholesaler),
                agent("HC1", Role::HealthCenter),
                agent("HC2", Role::HealthCenter),
            ],
            links: vec![
                link("MN1", "WS1"),
                link("MN2", "WS2"),
                link("WS1", "HC1"),
                link("WS1", "HC2"),
                link("WS2", "HC1"),
                link("WS2", "HC2"),
            ],
        }
    }

    pub fn validate(&self) -> Result<Network, SimError> {
        Network::new(self)
    }
}

/// A topology that passed validation, with adjacency resolved to indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    pub(crate) agents: Vec<AgentSpec>,
    pub(crate) suppliers: Vec<Vec<AgentIdx>>,
    pub(crate) customers: Vec<Vec<AgentIdx>>,
    /// Agents in upstream-first order.
    pub(crate) topo_order: Vec<AgentIdx>,
}

impl Network {
    fn new(topology: &NetworkTopology) -> Result<Self, SimError> {
        if topology.agents.is_empty() {
            return Err(SimError::Topology("network has no agents".into()));
        }
        let mut by_id = BTreeMap::new();
        for (i, a) in topology.agents.iter().enumerate() {
            if by_id.insert(a.id.clone(), AgentIdx(i)).is_some() {
                return Err(SimError::Topology(format!("duplicate agent id {}", a.id)));
            }
        }
        let n = topology.agents.len();
        let mut suppliers = vec![Vec::new(); n];
        let mut customers = vec![Vec::new(); n];
        for l in &topology.links {
            let s = *by_id
                .get(&l.supplier)
                .ok_or_else(|| SimError::Topology(format!("unknown supplier {}", l.supplier)))?;
            let c = *by_id
                .get(&l.customer)
                .ok_or_else(|| SimError::Topology(format!("unknown customer {}", l.customer)))?;
            if s == c {
                return Err(SimError::Cycle(l.supplier.clone()));
            }
            if customers[s.0].contains(&c) {
                return Err(SimError::Topology(format!("duplicate link {} -> {}", l.supplier, l.customer)));
            }
            customers[s.0].push(c);
            suppliers[c.0].push(s);
        }
        for list in suppliers.iter_mut().chain(customers.iter_mut()) {
            list.sort();
        }

        // Kahn's algorithm; anything left over sits on a cycle.
        let mut indegree: Vec<usize> = suppliers.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut topo_order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            topo_order.push(AgentIdx(i));
            for c in &customers[i] {
                indegree[c.0] -= 1;
                if indegree[c.0] == 0 {
                    queue.push_back(c.0);
                }
            }
        }
        if topo_order.len() != n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
            return Err(SimError::Cycle(topology.agents[stuck].id.clone()));
        }

        for (i, a) in topology.agents.iter().enumerate() {
            let ok_upstream = match a.role {
                Role::Manufacturer => suppliers[i].is_empty(),
                Role::Wholesaler => {
                    !suppliers[i].is_empty()
                        && suppliers[i].iter().all(|s| topology.agents[s.0].role == Role::Manufacturer)
                }
                Role::HealthCenter => {
                    !suppliers[i].is_empty()
                        && suppliers[i].iter().all(|s| topology.agents[s.0].role == Role::Wholesaler)
                }
            };
            if !ok_upstream {
                return Err(SimError::Orphan(a.id.clone()));
            }
            if a.role == Role::HealthCenter && !customers[i].is_empty() {
                return Err(SimError::Topology(format!("health center {} cannot supply other agents", a.id)));
            }
        }

        Ok(Network { agents: topology.agents.clone(), suppliers, customers, topo_order })
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<AgentIdx> {
        self.agents.iter().position(|a| a.id == id).map(AgentIdx)
    }

    pub fn id(&self, idx: AgentIdx) -> &str {
        &self.agents[idx.0].id
    }

    pub fn role(&self, idx: AgentIdx) -> Role {
        self.agents[idx.0].role
    }

    pub fn suppliers(&self, idx: AgentIdx) -> &[AgentIdx] {
        &self.suppliers[idx.0]
    }

    pub fn customers(&self, idx: AgentIdx) -> &[AgentIdx] {
        &self.customers[idx.0]
    }

    pub fn indices(&self) -> impl Iterator<Item = AgentIdx> {
        (0..self.agents.len()).map(AgentIdx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_topology_validates() {
        let net = NetworkTopology::two_by_two_by_two().validate().unwrap();
        assert_eq!(net.len(), 6);
        let hc1 = net.index_of("HC1").unwrap();
        assert_eq!(net.suppliers(hc1).len(), 2);
        let ws1 = net.index_of("WS1").unwrap();
        assert_eq!(net.suppliers(ws1), &[net.index_of("MN1").unwrap()]);
        assert_eq!(net.topo_order.len(), 6);
    }

    #[test]
    fn cycle_rejected() {
        let mut t = NetworkTopology::two_by_two_by_two();
        t.links.push(LinkSpec { supplier: "HC1".into(), customer: "MN1".into() });
        assert!(matches!(t.validate(), Err(SimError::Cycle(_))));
    }

    #[test]
    fn orphan_rejected() {
        let mut t = NetworkTopology::two_by_two_by_two();
        t.links.retain(|l| l.customer != "WS2");
        assert!(matches!(t.validate(), Err(SimError::Orphan(id)) if id == "WS2"));
    }

    #[test]
    fn unknown_endpoint_rejected() {
        let mut t = NetworkTopology::two_by_two_by_two();
        t.links.push(LinkSpec { supplier: "MN9".into(), customer: "WS1".into() });
        assert!(matches!(t.validate(), Err(SimError::Topology(_))));
    }
}
