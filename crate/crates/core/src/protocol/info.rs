use serde::{Deserialize, Serialize};

use super::condition::{Condition, InfoLevel};
use crate::sim::{Role, SimState, SplitRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRate {
    pub customer: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorNote {
    pub agent: String,
    pub note: String,
}

/// Supply-chain information shared with the player, filtered by condition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InfoPanel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manufacturer_inventory: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery_rates: Option<Vec<DeliveryRate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hc_behavior: Option<Vec<BehaviorNote>>,
}

impl InfoPanel {
    pub fn visible_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.manufacturer_inventory.is_some() {
            out.push("manufacturer_inventory");
        }
        if self.delivery_rates.is_some() {
            out.push("delivery_rates");
        }
        if self.hc_behavior.is_some() {
            out.push("hc_behavior");
        }
        out
    }
}

fn behavior_note(rule: SplitRule) -> &'static str {
    match rule {
        SplitRule::Trust => "orders less from a wholesaler that fails to deliver consistently",
        SplitRule::Equal => "always splits its orders equally between wholesalers",
    }
}

/// Builds the panel for the controllable agent from the current state.
pub fn visible_info(condition: &Condition, state: &SimState) -> InfoPanel {
    if condition.info == InfoLevel::None {
        return InfoPanel::default();
    }
    let net = state.network();
    let Some(me) = state.params().controllable() else {
        return InfoPanel::default();
    };
    let manufacturer_inventory = net.suppliers(me).first().map(|s| state.agent(*s).on_hand);
    if condition.info == InfoLevel::Partial {
        return InfoPanel { manufacturer_inventory, ..InfoPanel::default() };
    }
    let delivery_rates = net
        .customers(me)
        .iter()
        .enumerate()
        .map(|(pos, c)| DeliveryRate { customer: net.id(*c).to_string(), rate: state.agent(me).delivery_rate[pos] })
        .collect();
    let hc_behavior = net
        .indices()
        .filter(|i| net.role(*i) == Role::HealthCenter)
        .map(|i| BehaviorNote {
            agent: net.id(i).to_string(),
            note: behavior_note(state.params().split_rule(i)).to_string(),
        })
        .collect();
    InfoPanel { manufacturer_inventory, delivery_rates: Some(delivery_rates), hc_behavior: Some(hc_behavior) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{DisruptionSite, StudyTag};
    use crate::sim::{ScenarioConfig, StockTarget};

    fn cond(info: InfoLevel) -> Condition {
        Condition { disruption: DisruptionSite::Mn1, info, study: StudyTag::Study1 }
    }

    #[test]
    fn panel_by_level() {
        // MN1 cover chosen so its steady on-hand is 120 units.
        let mut cfg = ScenarioConfig::default();
        cfg.agent_mut("MN1").unwrap().stock_target = StockTarget::Units(220);
        let state = SimState::build(&cfg).unwrap();

        assert_eq!(visible_info(&cond(InfoLevel::None), &state), InfoPanel::default());

        let partial = visible_info(&cond(InfoLevel::Partial), &state);
        assert_eq!(partial.manufacturer_inventory, Some(120));
        assert_eq!(partial.visible_fields(), vec!["manufacturer_inventory"]);

        let complete = visible_info(&cond(InfoLevel::Complete), &state);
        assert_eq!(complete.manufacturer_inventory, Some(120));
        let rates = complete.delivery_rates.unwrap();
        assert_eq!(rates.len(), 2);
        assert_eq!(rates[0].customer, "HC1");
        assert_eq!(complete.hc_behavior.unwrap().len(), 2);
    }

    #[test]
    fn visible_fields_are_nested() {
        let state = SimState::build(&ScenarioConfig::default()).unwrap();
        let fields = |l| visible_info(&cond(l), &state).visible_fields();
        let none = fields(InfoLevel::None);
        let partial = fields(InfoLevel::Partial);
        let complete = fields(InfoLevel::Complete);
        assert!(none.iter().all(|f| partial.contains(f)));
        assert!(partial.iter().all(|f| complete.contains(f)));
        assert!(none.len() < partial.len() && partial.len() < complete.len());
    }
}
