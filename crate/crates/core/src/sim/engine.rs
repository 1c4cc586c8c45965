//! The weekly flow simulator.
//!
//! A week runs in two halves. [`SimState::open_week`] delivers shipments and
//! production that arrive this week and books incoming orders; at that point
//! the controlled agent can inspect its position. [`OpenWeek::close`] then
//! ships, places orders, admits production and books costs. An order placed
//! in week `t` reaches its supplier in `t + 1`, ships the same week, and is
//! received in `t + 2`. Production admitted in `t` completes in `t + 2`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{CostParams, DisruptionEvent, ScenarioConfig, StockTarget};
use super::policy::{
    allocate, largest_remainder, order_up_to_suggestion, split_demand, trust_update, AllocationPolicy,
    PositionView, SplitRule, TrustState,
};
use super::report::{AgentWeek, LinkWeek, WeekReport};
use super::topology::{AgentIdx, Network, Role};
use super::SimError;

/// Immutable parameters shared by every state of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub(crate) net: Network,
    pub(crate) levels: Vec<u64>,
    pub(crate) capacity: Vec<Option<u64>>,
    pub(crate) demand: Vec<u64>,
    pub(crate) split: Vec<SplitRule>,
    pub(crate) allocation: Vec<AllocationPolicy>,
    pub(crate) costs: CostParams,
    pub(crate) disruptions: Vec<(AgentIdx, DisruptionEvent)>,
    pub(crate) controllable: Option<AgentIdx>,
    pub(crate) throughput: Vec<u64>,
}

impl SimParams {
    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn level(&self, agent: AgentIdx) -> u64 {
        self.levels[agent.0]
    }

    pub fn split_rule(&self, agent: AgentIdx) -> SplitRule {
        self.split[agent.0]
    }

    pub fn steady_throughput(&self, agent: AgentIdx) -> u64 {
        self.throughput[agent.0]
    }

    pub fn controllable(&self) -> Option<AgentIdx> {
        self.controllable
    }

    /// Production capacity of a manufacturer in `week`, after disruptions.
    pub fn effective_capacity(&self, agent: AgentIdx, week: u32) -> Option<u64> {
        let base = self.capacity[agent.0]?;
        let fraction = self
            .disruptions
            .iter()
            .filter(|(a, d)| *a == agent && d.covers(week))
            .map(|(_, d)| d.capacity_fraction)
            .fold(1.0_f64, f64::min);
        if fraction >= 1.0 {
            Some(base)
        } else {
            Some((base as f64 * fraction + 1e-9).floor() as u64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inbound {
    pub arrival_week: u32,
    pub units: u64,
    /// Supplier, or the manufacturer itself for production.
    pub from: AgentIdx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingOrder {
    pub arrival_week: u32,
    pub units: u64,
    pub customer: AgentIdx,
    pub supplier: AgentIdx,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Ledger {
    pub revenue: f64,
    pub holding_cost: f64,
    pub stockout_cost: f64,
}

impl Ledger {
    pub fn profit(&self) -> f64 {
        self.revenue - self.holding_cost - self.stockout_cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub on_hand: u64,
    /// Units owed to each customer, aligned with the network's customer list.
    /// Health centers keep a single entry for patients.
    pub backlog: Vec<u64>,
    pub on_order: u64,
    pub inbound: Vec<Inbound>,
    pub ledger: Ledger,
    /// Health centers only, aligned with the supplier list.
    pub trust: Option<TrustState>,
    /// Most recent fill rate per customer.
    pub delivery_rate: Vec<f64>,
}

impl AgentState {
    pub fn total_backlog(&self) -> u64 {
        self.backlog.iter().sum()
    }

    pub fn position(&self) -> PositionView {
        PositionView { on_hand: self.on_hand, on_order: self.on_order, backlog: self.total_backlog() }
    }
}

/// Full simulation state at the start of a week.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub week: u32,
    params: Arc<SimParams>,
    agents: Vec<AgentState>,
    orders: Vec<PendingOrder>,
    external: bool,
}

/// How the controlled agent divides scarce stock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    Policy(AllocationPolicy),
    /// Explicit units per customer, in customer order.
    Manual(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalDecision {
    pub order: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Allocation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomerLine {
    pub customer: String,
    pub new_order: u64,
    pub owed: u64,
    pub shipped_last_week: u64,
}

/// What the controlled agent sees once the week's receipts are in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlledView {
    pub agent: String,
    pub week: u32,
    pub on_hand: u64,
    pub receipts: u64,
    pub customers: Vec<CustomerLine>,
    pub total_owed: u64,
    pub backlog_carried: u64,
    pub on_order: u64,
    pub suggestion: u64,
    pub allocation_required: bool,
}

impl SimState {
    /// Builds the network described by `config` in steady state: zero
    /// backlog and pipelines primed with steady-state flows.
    pub fn build(config: &ScenarioConfig) -> Result<SimState, SimError> {
        let net = config.topology().validate()?;
        let n = net.len();
        let costs = config.costs;
        for (name, v) in [("holding", costs.holding), ("stockout", costs.stockout), ("revenue", costs.revenue)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SimError::Parameter(format!("{name} cost must be a finite value >= 0, got {v}")));
            }
        }
        if costs.stockout <= costs.holding {
            return Err(SimError::Parameter("stockout cost must exceed holding cost".into()));
        }

        let mut demand = vec![0; n];
        let mut capacity = vec![None; n];
        let mut split = vec![SplitRule::Equal; n];
        let mut allocation = vec![AllocationPolicy::Proportional; n];
        for (i, a) in config.agents.iter().enumerate() {
            match a.role {
                Role::HealthCenter => {
                    demand[i] = a
                        .demand
                        .ok_or_else(|| SimError::Parameter(format!("health center {} needs a demand", a.id)))?;
                    split[i] = a.split.unwrap_or(SplitRule::Equal);
                }
                Role::Manufacturer => {
                    capacity[i] = Some(
                        a.capacity
                            .ok_or_else(|| SimError::Parameter(format!("manufacturer {} needs a capacity", a.id)))?,
                    );
                }
                Role::Wholesaler => {}
            }
            if let Some(p) = a.allocation {
                allocation[i] = p;
            }
        }

        let trust_template = TrustState::new(1, config.trust.lambda, config.trust.floor)?;

        // Steady-state flows, computed downstream first.
        let mut link_flow = vec![Vec::new(); n];
        let mut throughput = vec![0u64; n];
        for &idx in net.topo_order.iter().rev() {
            let i = idx.0;
            throughput[i] = match net.role(idx) {
                Role::HealthCenter => demand[i],
                _ => net
                    .customers(idx)
                    .iter()
                    .map(|c| {
                        let pos = net.suppliers(*c).iter().position(|s| *s == idx).unwrap();
                        link_flow[c.0][pos]
                    })
                    .sum(),
            };
            let suppliers = net.suppliers(idx).len();
            link_flow[i] = match net.role(idx) {
                Role::Manufacturer => Vec::new(),
                Role::HealthCenter => {
                    let trust = TrustState { scores: vec![1.0; suppliers], ..trust_template.clone() };
                    split_demand(split[i], throughput[i], &trust)
                }
                Role::Wholesaler => largest_remainder(throughput[i], &vec![1; suppliers]),
            };
        }

        let mut levels = vec![0; n];
        for (i, a) in config.agents.iter().enumerate() {
            levels[i] = match a.stock_target {
                StockTarget::Units(u) => u,
                StockTarget::CoverWeeks(w) => w as u64 * throughput[i],
            };
            if levels[i] < 2 * throughput[i] {
                return Err(SimError::Parameter(format!(
                    "stock target of {} ({}) is below its two-week pipeline ({})",
                    a.id,
                    levels[i],
                    2 * throughput[i]
                )));
            }
            if let Some(cap) = capacity[i] {
                if cap < throughput[i] {
                    return Err(SimError::Parameter(format!(
                        "capacity of {} ({cap}) is below steady throughput ({})",
                        a.id, throughput[i]
                    )));
                }
            }
        }

        let mut disruptions = Vec::new();
        for d in &config.disruptions {
            let idx = net
                .index_of(&d.target)
                .ok_or_else(|| SimError::Parameter(format!("disruption targets unknown agent {}", d.target)))?;
            if net.role(idx) != Role::Manufacturer {
                return Err(SimError::Parameter(format!("disruption target {} is not a manufacturer", d.target)));
            }
            if d.start_week > d.end_week || !(0.0..=1.0).contains(&d.capacity_fraction) {
                return Err(SimError::Parameter(format!("malformed disruption on {}", d.target)));
            }
            disruptions.push((idx, d.clone()));
        }

        let controllable = match &config.controllable {
            Some(id) => Some(
                net.index_of(id)
                    .ok_or_else(|| SimError::Parameter(format!("controllable agent {id} not in network")))?,
            ),
            None => None,
        };

        let start = config.start_week;
        let mut agents: Vec<AgentState> = (0..n)
            .map(|i| {
                let idx = AgentIdx(i);
                let customers = match net.role(idx) {
                    Role::HealthCenter => 1,
                    _ => net.customers(idx).len(),
                };
                let trust = (net.role(idx) == Role::HealthCenter).then(|| TrustState {
                    scores: vec![1.0; net.suppliers(idx).len()],
                    ..trust_template.clone()
                });
                AgentState {
                    on_hand: levels[i] - 2 * throughput[i],
                    backlog: vec![0; customers],
                    on_order: 2 * throughput[i],
                    inbound: Vec::new(),
                    ledger: Ledger::default(),
                    trust,
                    delivery_rate: vec![1.0; customers],
                }
            })
            .collect();
        let mut orders = Vec::new();
        for idx in net.indices() {
            let i = idx.0;
            match net.role(idx) {
                Role::Manufacturer => {
                    for w in [start, start + 1] {
                        if throughput[i] > 0 {
                            agents[i].inbound.push(Inbound { arrival_week: w, units: throughput[i], from: idx });
                        }
                    }
                }
                _ => {
                    for (pos, &s) in net.suppliers(idx).iter().enumerate() {
                        let f = link_flow[i][pos];
                        if f > 0 {
                            agents[i].inbound.push(Inbound { arrival_week: start, units: f, from: s });
                            orders.push(PendingOrder { arrival_week: start, units: f, customer: idx, supplier: s });
                        }
                    }
                }
            }
        }

        let params = SimParams {
            net,
            levels,
            capacity,
            demand,
            split,
            allocation,
            costs,
            disruptions,
            controllable,
            throughput,
        };
        Ok(SimState { week: start, params: Arc::new(params), agents, orders, external: false })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn network(&self) -> &Network {
        &self.params.net
    }

    pub fn agent(&self, idx: AgentIdx) -> &AgentState {
        &self.agents[idx.0]
    }

    pub fn agent_by_id(&self, id: &str) -> Option<&AgentState> {
        self.params.net.index_of(id).map(|i| &self.agents[i.0])
    }

    pub fn pending_orders(&self) -> &[PendingOrder] {
        &self.orders
    }

    pub fn is_external(&self) -> bool {
        self.external
    }

    /// Hands the controllable agent to an outside decision maker (or back).
    pub fn set_external(&mut self, on: bool) -> Result<(), SimError> {
        if on && self.params.controllable.is_none() {
            return Err(SimError::Parameter("scenario declares no controllable agent".into()));
        }
        self.external = on;
        Ok(())
    }

    pub fn controlled_agent(&self) -> Option<AgentIdx> {
        if self.external {
            self.params.controllable
        } else {
            None
        }
    }

    /// Zeroes every money ledger; physical state is untouched.
    pub fn reset_ledgers(&mut self) {
        for a in &mut self.agents {
            a.ledger = Ledger::default();
        }
    }

    pub fn ledger(&self, id: &str) -> Option<Ledger> {
        self.agent_by_id(id).map(|a| a.ledger)
    }

    /// Mid-week view of the controllable agent, whether or not it is
    /// currently external.
    pub fn controllable_view(&self) -> Option<ControlledView> {
        let idx = self.params.controllable?;
        Some(self.open_week().view_of(idx))
    }

    pub fn step(&self, external: Option<&ExternalDecision>) -> Result<(SimState, WeekReport), SimError> {
        self.open_week().close(external)
    }

    /// Delivers this week's arrivals and books incoming orders.
    pub fn open_week(&self) -> OpenWeek {
        let mut state = self.clone();
        let week = state.week;
        let net = &state.params.net;
        let n = net.len();
        let on_hand_start: Vec<u64> = state.agents.iter().map(|a| a.on_hand).collect();
        let backlog_start: Vec<u64> = state.agents.iter().map(AgentState::total_backlog).collect();
        let mut receipts = vec![0u64; n];
        let mut new_orders = vec![Vec::new(); n];
        let mut deliveries = Vec::new();
        for (i, a) in state.agents.iter_mut().enumerate() {
            let mut arrived = 0;
            a.inbound.retain(|inb| {
                if inb.arrival_week <= week {
                    arrived += inb.units;
                    deliveries.push((inb.from, AgentIdx(i), inb.units));
                    false
                } else {
                    true
                }
            });
            a.on_hand += arrived;
            a.on_order -= arrived;
            receipts[i] = arrived;
            new_orders[i] = vec![0u64; a.backlog.len()];
        }
        let params = state.params.clone();
        let mut remaining = Vec::with_capacity(state.orders.len());
        for o in state.orders.drain(..) {
            if o.arrival_week <= week {
                let pos = params.net.customers(o.supplier).iter().position(|c| *c == o.customer).unwrap();
                state.agents[o.supplier.0].backlog[pos] += o.units;
                new_orders[o.supplier.0][pos] += o.units;
            } else {
                remaining.push(o);
            }
        }
        state.orders = remaining;
        for idx in params.net.indices() {
            if params.net.role(idx) == Role::HealthCenter {
                state.agents[idx.0].backlog[0] += params.demand[idx.0];
                new_orders[idx.0][0] += params.demand[idx.0];
            }
        }
        OpenWeek { state, on_hand_start, backlog_start, receipts, new_orders, deliveries }
    }
}

/// A week whose arrivals have been processed but whose decisions have not.
#[derive(Debug, Clone)]
pub struct OpenWeek {
    state: SimState,
    on_hand_start: Vec<u64>,
    backlog_start: Vec<u64>,
    receipts: Vec<u64>,
    new_orders: Vec<Vec<u64>>,
    /// (from, to, units) delivered when the week opened.
    deliveries: Vec<(AgentIdx, AgentIdx, u64)>,
}

impl OpenWeek {
    pub fn week(&self) -> u32 {
        self.state.week
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn view_of(&self, idx: AgentIdx) -> ControlledView {
        let net = &self.state.params.net;
        let a = &self.state.agents[idx.0];
        let names: Vec<String> = match net.role(idx) {
            Role::HealthCenter => vec!["patients".to_string()],
            _ => net.customers(idx).iter().map(|c| net.id(*c).to_string()).collect(),
        };
        let customers: Vec<CustomerLine> = names
            .into_iter()
            .enumerate()
            .map(|(pos, customer)| CustomerLine {
                customer,
                new_order: self.new_orders[idx.0][pos],
                owed: a.backlog[pos],
                shipped_last_week: self.last_shipped(idx, pos),
            })
            .collect();
        let total_owed = a.total_backlog();
        ControlledView {
            agent: net.id(idx).to_string(),
            week: self.state.week,
            on_hand: a.on_hand,
            receipts: self.receipts[idx.0],
            customers,
            total_owed,
            backlog_carried: self.backlog_start[idx.0],
            on_order: a.on_order,
            suggestion: order_up_to_suggestion(a.position(), self.state.params.levels[idx.0]),
            allocation_required: a.on_hand < total_owed,
        }
    }

    fn last_shipped(&self, idx: AgentIdx, pos: usize) -> u64 {
        let net = &self.state.params.net;
        match net.customers(idx).get(pos) {
            Some(c) => self
                .deliveries
                .iter()
                .filter(|(from, to, _)| *from == idx && to == c)
                .map(|(_, _, units)| units)
                .sum(),
            None => 0,
        }
    }

    /// Ships, orders, produces and books costs, then advances the clock.
    pub fn close(self, external: Option<&ExternalDecision>) -> Result<(SimState, WeekReport), SimError> {
        let OpenWeek { mut state, on_hand_start, backlog_start, receipts, new_orders, .. } = self;
        let params = state.params.clone();
        let net = &params.net;
        let week = state.week;
        let n = net.len();
        let controlled = state.controlled_agent();
        match (controlled, external) {
            (Some(_), None) => return Err(SimError::MissingExternal),
            (None, Some(_)) => return Err(SimError::UnexpectedExternal),
            _ => {}
        }

        // Shipping.
        let mut shipped_total = vec![0u64; n];
        let mut links = Vec::new();
        // (customer, supplier position, fill rate)
        let mut fills: Vec<(AgentIdx, usize, f64)> = Vec::new();
        for idx in net.indices() {
            let i = idx.0;
            let owed = state.agents[i].backlog.clone();
            let on_hand = state.agents[i].on_hand;
            let alloc = if Some(idx) == controlled {
                let decision = external.expect("checked above");
                let total: u64 = owed.iter().sum();
                if on_hand >= total {
                    owed.clone()
                } else {
                    match &decision.allocation {
                        None => return Err(SimError::MissingAllocation),
                        Some(Allocation::Policy(p)) => allocate(on_hand, &owed, *p),
                        Some(Allocation::Manual(q)) => {
                            if q.len() != owed.len() {
                                return Err(SimError::AllocationShape { expected: owed.len(), got: q.len() });
                            }
                            if q.iter().sum::<u64>() > on_hand {
                                return Err(SimError::AllocationExceedsOnHand {
                                    requested: q.iter().sum(),
                                    on_hand,
                                });
                            }
                            if q.iter().zip(&owed).any(|(a, o)| a > o) {
                                return Err(SimError::AllocationExceedsDemand);
                            }
                            q.clone()
                        }
                    }
                }
            } else {
                allocate(on_hand, &owed, params.allocation[i])
            };
            let sent: u64 = alloc.iter().sum();
            let a = &mut state.agents[i];
            a.on_hand -= sent;
            for (pos, units) in alloc.iter().enumerate() {
                a.backlog[pos] -= units;
                a.delivery_rate[pos] = if owed[pos] == 0 { 1.0 } else { *units as f64 / owed[pos] as f64 };
            }
            shipped_total[i] = sent;
            if net.role(idx) != Role::HealthCenter {
                for (pos, &c) in net.customers(idx).iter().enumerate() {
                    if alloc[pos] > 0 {
                        state.agents[c.0].inbound.push(Inbound {
                            arrival_week: week + 1,
                            units: alloc[pos],
                            from: idx,
                        });
                    }
                    let fill = state.agents[i].delivery_rate[pos];
                    let spos = net.suppliers(c).iter().position(|s| *s == idx).unwrap();
                    fills.push((c, spos, fill));
                    links.push(LinkWeek {
                        supplier: net.id(idx).to_string(),
                        customer: net.id(c).to_string(),
                        ordered: 0,
                        owed: owed[pos],
                        shipped: alloc[pos],
                        fill_rate: fill,
                    });
                }
            }
        }

        // Health centers update trust from what each wholesaler delivered.
        for idx in net.indices().filter(|i| net.role(*i) == Role::HealthCenter) {
            let mut rates = vec![1.0; net.suppliers(idx).len()];
            for (c, spos, f) in &fills {
                if *c == idx {
                    rates[*spos] = *f;
                }
            }
            if let Some(t) = state.agents[idx.0].trust.as_ref() {
                state.agents[idx.0].trust = Some(trust_update(t, &rates)?);
            }
        }

        // Ordering and production.
        let mut order_total = vec![0u64; n];
        let mut suggestion = vec![0u64; n];
        let mut requested = vec![None; n];
        let mut capacity_now = vec![None; n];
        for idx in net.indices() {
            let i = idx.0;
            let sugg = order_up_to_suggestion(state.agents[i].position(), params.levels[i]);
            suggestion[i] = sugg;
            match net.role(idx) {
                Role::Manufacturer => {
                    let cap = params.effective_capacity(idx, week).unwrap_or(u64::MAX);
                    let admitted = sugg.min(cap);
                    requested[i] = Some(sugg);
                    capacity_now[i] = Some(cap);
                    if admitted > 0 {
                        state.agents[i].inbound.push(Inbound { arrival_week: week + 2, units: admitted, from: idx });
                    }
                    state.agents[i].on_order += admitted;
                    order_total[i] = admitted;
                }
                role => {
                    let qty = if Some(idx) == controlled { external.expect("checked above").order } else { sugg };
                    let parts = if role == Role::HealthCenter {
                        let trust = state.agents[i].trust.as_ref().expect("health centers track trust");
                        split_demand(params.split[i], qty, trust)
                    } else {
                        largest_remainder(qty, &vec![1; net.suppliers(idx).len()])
                    };
                    for (pos, &s) in net.suppliers(idx).iter().enumerate() {
                        if parts[pos] > 0 {
                            state.orders.push(PendingOrder {
                                arrival_week: week + 1,
                                units: parts[pos],
                                customer: idx,
                                supplier: s,
                            });
                        }
                        if let Some(l) =
                            links.iter_mut().find(|l| l.supplier == net.id(s) && l.customer == net.id(idx))
                        {
                            l.ordered = parts[pos];
                        }
                    }
                    state.agents[i].on_order += qty;
                    order_total[i] = qty;
                }
            }
        }

        // Accounting.
        let costs = params.costs;
        let mut agents_report = Vec::with_capacity(n);
        for idx in net.indices() {
            let i = idx.0;
            let a = &mut state.agents[i];
            let backlog_end = a.total_backlog();
            let revenue = costs.revenue * shipped_total[i] as f64;
            let holding = costs.holding * a.on_hand as f64;
            let stockout = costs.stockout * backlog_end as f64;
            a.ledger.revenue += revenue;
            a.ledger.holding_cost += holding;
            a.ledger.stockout_cost += stockout;
            let row = AgentWeek {
                agent: net.id(idx).to_string(),
                role: net.role(idx),
                on_hand_start: on_hand_start[i],
                receipts: receipts[i],
                demand: new_orders[i].iter().sum(),
                shipments: shipped_total[i],
                sales: shipped_total[i],
                on_hand_end: a.on_hand,
                backlog_start: backlog_start[i],
                backlog_end,
                order: order_total[i],
                suggestion: suggestion[i],
                production_requested: requested[i],
                capacity: capacity_now[i],
                revenue,
                holding_cost: holding,
                stockout_cost: stockout,
            };
            debug_assert!(row.conserves_flow());
            agents_report.push(row);
        }

        state.week += 1;
        Ok((state, WeekReport { week, agents: agents_report, links }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::DisruptionEvent;

    fn default_state() -> SimState {
        SimState::build(&ScenarioConfig::default()).unwrap()
    }

    fn mn1_disruption() -> DisruptionEvent {
        DisruptionEvent { target: "MN1".into(), start_week: 28, end_week: 33, capacity_fraction: 0.05 }
    }

    #[test]
    fn builds_default_network_at_week_17() {
        let s = default_state();
        assert_eq!(s.week, 17);
        assert_eq!(s.network().len(), 6);
        assert_eq!(s.params().controllable(), s.network().index_of("WS1"));
        for a in &s.agents {
            assert_eq!(a.total_backlog(), 0);
        }
    }

    #[test]
    fn default_run_is_stationary() {
        let mut s = default_state();
        let mut reports = Vec::new();
        for _ in 0..10 {
            let (next, r) = s.step(None).unwrap();
            reports.push(r);
            s = next;
        }
        for r in &reports[1..] {
            assert!(r.same_flows(&reports[0]), "week {} differs from week 17", r.week);
        }
        let ws1 = reports[0].agent("WS1").unwrap();
        assert_eq!(ws1.receipts, 50);
        assert_eq!(ws1.shipments, 50);
        assert_eq!(ws1.backlog_end, 0);
    }

    #[test]
    fn zero_demand_has_zero_flows_and_costs() {
        let cfg = ScenarioConfig::default().with_uniform_demand(0);
        let mut s = SimState::build(&cfg).unwrap();
        for _ in 0..5 {
            let (next, r) = s.step(None).unwrap();
            for a in &r.agents {
                assert_eq!((a.receipts, a.shipments, a.order, a.on_hand_end), (0, 0, 0, 0));
                assert_eq!(a.profit(), 0.0);
            }
            s = next;
        }
    }

    #[test]
    fn zero_order_zero_demand_only_advances_week() {
        let cfg = ScenarioConfig::default().with_uniform_demand(0);
        let mut s = SimState::build(&cfg).unwrap();
        s.set_external(true).unwrap();
        let before = s.clone();
        let (after, _) = s.step(Some(&ExternalDecision { order: 0, allocation: None })).unwrap();
        assert_eq!(after.week, before.week + 1);
        assert_eq!(after.agents, before.agents);
        assert_eq!(after.orders, before.orders);
    }

    #[test]
    fn external_order_arrives_two_weeks_later() {
        let mut s = default_state();
        s.set_external(true).unwrap();
        // Distinctive order in week 17; everything else follows the suggestion.
        let first = s.controllable_view().unwrap();
        let (s1, _) = s.step(Some(&ExternalDecision { order: first.suggestion + 37, allocation: None })).unwrap();
        let v = s1.controllable_view().unwrap();
        let (s2, r18) = s1.step(Some(&ExternalDecision { order: v.suggestion, allocation: None })).unwrap();
        let (_, r19) = s2
            .step(Some(&ExternalDecision { order: s2.controllable_view().unwrap().suggestion, allocation: None }))
            .unwrap();
        assert_eq!(r18.agent("MN1").unwrap().demand, 50 + 37);
        assert_eq!(r18.agent("WS1").unwrap().receipts, 50);
        assert_eq!(r19.agent("WS1").unwrap().receipts, 50 + 37);
    }

    #[test]
    fn external_decision_required_iff_controlled() {
        let mut s = default_state();
        assert!(matches!(
            s.step(Some(&ExternalDecision { order: 1, allocation: None })),
            Err(SimError::UnexpectedExternal)
        ));
        s.set_external(true).unwrap();
        assert!(matches!(s.step(None), Err(SimError::MissingExternal)));
    }

    #[test]
    fn disruption_clamps_production_to_five_percent() {
        let cfg = ScenarioConfig::default().with_disruption(mn1_disruption());
        let mut s = SimState::build(&cfg).unwrap();
        while s.week < 40 {
            let (next, r) = s.step(None).unwrap();
            let mn1 = r.agent("MN1").unwrap();
            if (28..=33).contains(&r.week) {
                assert_eq!(mn1.capacity, Some(5));
                assert_eq!(mn1.order, mn1.production_requested.unwrap().min(5));
            } else {
                assert_eq!(mn1.capacity, Some(100));
            }
            s = next;
        }
    }

    #[test]
    fn manual_allocation_validated() {
        let cfg = ScenarioConfig::default().with_disruption(mn1_disruption());
        let mut s = SimState::build(&cfg).unwrap();
        s.set_external(true).unwrap();
        // run until WS1 is short
        loop {
            let v = s.controllable_view().unwrap();
            if v.allocation_required {
                let too_much = Allocation::Manual(vec![v.on_hand, 1]);
                let err = s.step(Some(&ExternalDecision { order: 0, allocation: Some(too_much) })).unwrap_err();
                assert!(matches!(err, SimError::AllocationExceedsOnHand { .. } | SimError::AllocationExceedsDemand));
                let missing = s.step(Some(&ExternalDecision { order: 0, allocation: None })).unwrap_err();
                assert!(matches!(missing, SimError::MissingAllocation));
                break;
            }
            let (next, _) = s.step(Some(&ExternalDecision { order: v.suggestion, allocation: None })).unwrap();
            s = next;
            assert!(s.week < 60, "WS1 never ran short");
        }
    }

    #[test]
    fn reset_ledgers_keeps_physical_state() {
        let mut s = default_state();
        for _ in 0..3 {
            s = s.step(None).unwrap().0;
        }
        let before = s.agent_by_id("WS1").unwrap().clone();
        assert!(before.ledger.revenue > 0.0);
        s.reset_ledgers();
        let after = s.agent_by_id("WS1").unwrap();
        assert_eq!(after.ledger, Ledger::default());
        assert_eq!(after.on_hand, before.on_hand);
        assert_eq!(after.inbound, before.inbound);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut cfg = ScenarioConfig::default();
        cfg.costs.stockout = 0.5;
        assert!(matches!(SimState::build(&cfg), Err(SimError::Parameter(_))));
        let mut cfg = ScenarioConfig::default();
        cfg.costs.holding = -1.0;
        assert!(matches!(SimState::build(&cfg), Err(SimError::Parameter(_))));
        let mut cfg = ScenarioConfig::default();
        cfg.agent_mut("MN1").unwrap().capacity = Some(10);
        assert!(matches!(SimState::build(&cfg), Err(SimError::Parameter(_))));
        let mut cfg = ScenarioConfig::default();
        cfg.agent_mut("WS1").unwrap().stock_target = StockTarget::CoverWeeks(1);
        assert!(matches!(SimState::build(&cfg), Err(SimError::Parameter(_))));
    }
}
