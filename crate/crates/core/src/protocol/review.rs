use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::sim::WeekReport;

/// Factual performance history shown before the thought-bubble prompt.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReviewData {
    pub agent: String,
    pub weeks: Vec<u32>,
    pub profit: Vec<f64>,
    pub revenue: Vec<f64>,
    pub holding_cost: Vec<f64>,
    pub stockout_cost: Vec<f64>,
    pub inventory: Vec<u64>,
    pub demand: Vec<u64>,
    pub backlog: Vec<u64>,
    pub shipments: Vec<u64>,
    pub orders: Vec<u64>,
}

impl ReviewData {
    pub fn len(&self) -> usize {
        self.weeks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weeks.is_empty()
    }
}

pub fn performance_review(history: &[WeekReport], agent: &str) -> Result<ReviewData, ProtocolError> {
    if history.is_empty() {
        return Err(ProtocolError::EmptyHistory);
    }
    let mut review = ReviewData { agent: agent.to_string(), ..ReviewData::default() };
    for report in history {
        let row = report.agent(agent).ok_or_else(|| ProtocolError::UnknownAgent(agent.to_string()))?;
        review.weeks.push(report.week);
        review.profit.push(row.profit());
        review.revenue.push(row.revenue);
        review.holding_cost.push(row.holding_cost);
        review.stockout_cost.push(row.stockout_cost);
        review.inventory.push(row.on_hand_end);
        review.demand.push(row.demand);
        review.backlog.push(row.backlog_end);
        review.shipments.push(row.shipments);
        review.orders.push(row.order);
    }
    Ok(review)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ScenarioConfig, SimState};

    fn history(cfg: &ScenarioConfig, weeks: usize) -> Vec<WeekReport> {
        let mut s = SimState::build(cfg).unwrap();
        (0..weeks)
            .map(|_| {
                let (n, r) = s.step(None).unwrap();
                s = n;
                r
            })
            .collect()
    }

    #[test]
    fn one_point_per_week() {
        let r = performance_review(&history(&ScenarioConfig::default(), 4), "WS1").unwrap();
        assert_eq!(r.len(), 4);
        assert_eq!(r.weeks, vec![17, 18, 19, 20]);
        assert_eq!(r.profit.len(), 4);
        assert_eq!(r.inventory, vec![50; 4]);
    }

    #[test]
    fn zero_flows_give_zero_series() {
        let cfg = ScenarioConfig::default().with_uniform_demand(0);
        let r = performance_review(&history(&cfg, 4), "WS1").unwrap();
        assert!(r.profit.iter().chain(&r.revenue).all(|v| *v == 0.0));
        assert!(r.inventory.iter().chain(&r.demand).chain(&r.backlog).all(|v| *v == 0));
    }

    #[test]
    fn empty_history_rejected() {
        assert!(matches!(performance_review(&[], "WS1"), Err(ProtocolError::EmptyHistory)));
    }
}
