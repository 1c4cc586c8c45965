//! Standalone runs: every agent, including the controllable one, follows its
//! own policy.

use std::path::Path;

use gamette_core::protocol::{DisruptionSite, Schedule};
use gamette_core::sim::{DisruptionEvent, ScenarioConfig, SimError, SimState, WeekReport};

use crate::provenance::{write_table, Provenance};

pub fn run_standalone(scenario: &ScenarioConfig, weeks: u32) -> Result<Vec<WeekReport>, SimError> {
    let mut state = SimState::build(scenario)?;
    let mut reports = Vec::with_capacity(weeks as usize);
    for _ in 0..weeks {
        let (next, report) = state.step(None)?;
        reports.push(report);
        state = next;
    }
    Ok(reports)
}

/// Puts the schedule's disruption window on `site`.
pub fn with_site(mut scenario: ScenarioConfig, site: DisruptionSite, schedule: &Schedule) -> ScenarioConfig {
    scenario.disruptions.push(DisruptionEvent {
        target: site.agent_id().to_string(),
        start_week: schedule.disruption.0,
        end_week: schedule.disruption.1,
        capacity_fraction: schedule.disruption_capacity_fraction,
    });
    scenario
}

pub fn agent_table(reports: &[WeekReport]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "week",
        "agent",
        "on_hand_start",
        "receipts",
        "demand",
        "shipments",
        "on_hand_end",
        "backlog_start",
        "backlog_end",
        "order",
        "suggestion",
        "capacity",
        "revenue",
        "holding_cost",
        "stockout_cost",
    ])?;
    for r in reports {
        for a in &r.agents {
            w.write_record([
                r.week.to_string(),
                a.agent.clone(),
                a.on_hand_start.to_string(),
                a.receipts.to_string(),
                a.demand.to_string(),
                a.shipments.to_string(),
                a.on_hand_end.to_string(),
                a.backlog_start.to_string(),
                a.backlog_end.to_string(),
                a.order.to_string(),
                a.suggestion.to_string(),
                a.capacity.map(|c| c.to_string()).unwrap_or_default(),
                a.revenue.to_string(),
                a.holding_cost.to_string(),
                a.stockout_cost.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn link_table(reports: &[WeekReport]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["week", "supplier", "customer", "ordered", "owed", "shipped", "fill_rate"])?;
    for r in reports {
        for l in &r.links {
            w.write_record([
                r.week.to_string(),
                l.supplier.clone(),
                l.customer.clone(),
                l.ordered.to_string(),
                l.owed.to_string(),
                l.shipped.to_string(),
                l.fill_rate.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Writes `trajectory.csv` and `links.csv` into `out`.
pub fn write_trajectory(out: &Path, prov: &Provenance, reports: &[WeekReport]) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    write_table(out, "trajectory.csv", prov, &agent_table(reports)?)?;
    write_table(out, "links.csv", prov, &link_table(reports)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_stationary() {
        let reports = run_standalone(&ScenarioConfig::default(), 39).unwrap();
        assert_eq!(reports.len(), 39);
        assert!(reports.iter().all(|r| r.same_flows(&reports[0])));
    }

    #[test]
    fn mn1_receipts_dip_in_shortage() {
        let s = Schedule::default();
        let cfg = with_site(ScenarioConfig::default(), DisruptionSite::Mn1, &s);
        let reports = run_standalone(&cfg, 39).unwrap();
        let receipts = |w: u32| reports.iter().find(|r| r.week == w).unwrap().agent("WS1").unwrap().receipts;
        let baseline = receipts(20);
        assert!((30..=36).any(|w| receipts(w) < baseline));
        assert!((21..=29).all(|w| receipts(w) == baseline));
    }

    #[test]
    fn zero_demand_gives_zero_flows() {
        let reports = run_standalone(&ScenarioConfig::default().with_uniform_demand(0), 10).unwrap();
        assert!(reports.iter().flat_map(|r| &r.agents).all(|a| a.receipts == 0 && a.shipments == 0 && a.order == 0));
    }

    #[test]
    fn csv_has_one_row_per_agent_week() {
        let reports = run_standalone(&ScenarioConfig::default(), 3).unwrap();
        assert_eq!(agent_table(&reports).unwrap().lines().count(), 1 + 3 * 6);
        assert_eq!(link_table(&reports).unwrap().lines().count(), 1 + 3 * 6);
    }
}
