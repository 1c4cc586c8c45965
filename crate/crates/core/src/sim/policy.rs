//! Decision rules used by simulated agents: order-up-to ordering, demand
//! splitting between wholesalers, trust tracking and inventory allocation.

use serde::{Deserialize, Serialize};

use super::SimError;

/// Inputs to the order-up-to rule, as seen by one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PositionView {
    pub on_hand: u64,
    /// Units ordered but not yet received: in the order pipeline, queued at
    /// the supplier, or in transit.
    pub on_order: u64,
    /// Units owed to customers.
    pub backlog: u64,
}

impl PositionView {
    pub fn inventory_position(&self) -> i128 {
        self.on_hand as i128 + self.on_order as i128 - self.backlog as i128
    }
}

/// `max(0, S - (on-hand + on-order - backlog))`.
pub fn order_up_to_suggestion(view: PositionView, level: u64) -> u64 {
    let gap = level as i128 - view.inventory_position();
    gap.max(0) as u64
}

/// Splits `total` into integer parts proportional to `weights` using the
/// largest-remainder method. Ties go to the lower index.
///
/// Returns all zeros when every weight is zero.
pub fn largest_remainder(total: u64, weights: &[u64]) -> Vec<u64> {
    let denom: u128 = weights.iter().map(|&w| w as u128).sum();
    if denom == 0 {
        return vec![0; weights.len()];
    }
    let mut parts = Vec::with_capacity(weights.len());
    let mut rems = Vec::with_capacity(weights.len());
    for &w in weights {
        let num = total as u128 * w as u128;
        parts.push((num / denom) as u64);
        rems.push(num % denom);
    }
    let assigned: u64 = parts.iter().sum();
    distribute_leftover(&mut parts, total - assigned, |a, b| rems[b].cmp(&rems[a]));
    parts
}

/// Real-weight variant of [`largest_remainder`].
pub fn largest_remainder_real(total: u64, weights: &[f64]) -> Vec<u64> {
    let denom: f64 = weights.iter().sum();
    if denom <= 0.0 {
        return vec![0; weights.len()];
    }
    let mut parts = Vec::with_capacity(weights.len());
    let mut rems = Vec::with_capacity(weights.len());
    for &w in weights {
        let exact = total as f64 * w / denom;
        let base = exact.floor().min(total as f64);
        parts.push(base as u64);
        rems.push(exact - base);
    }
    let assigned: u64 = parts.iter().sum();
    let leftover = total.saturating_sub(assigned);
    distribute_leftover(&mut parts, leftover, |a, b| rems[b].total_cmp(&rems[a]));
    // Float rounding can overshoot by a unit in pathological cases.
    let mut excess = parts.iter().sum::<u64>().saturating_sub(total);
    for p in parts.iter_mut().rev() {
        if excess == 0 {
            break;
        }
        let take = excess.min(*p);
        *p -= take;
        excess -= take;
    }
    parts
}

fn distribute_leftover<F>(parts: &mut [u64], leftover: u64, by_remainder: F)
where
    F: Fn(usize, usize) -> std::cmp::Ordering,
{
    let mut order: Vec<usize> = (0..parts.len()).collect();
    // stable sort keeps lower index first among equal remainders
    order.sort_by(|&a, &b| by_remainder(a, b));
    for &i in order.iter().cycle().take(leftover as usize) {
        parts[i] += 1;
    }
}

/// How a health center divides its order between wholesalers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRule {
    /// Equal shares regardless of delivery performance.
    Equal,
    /// Shares proportional to the trust score of each wholesaler.
    Trust,
}

/// Per-supplier trust scores kept by a health center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustState {
    pub scores: Vec<f64>,
    /// Smoothing factor of the exponential moving average, in (0, 1).
    pub lambda: f64,
    pub floor: f64,
}

impl TrustState {
    pub fn new(suppliers: usize, lambda: f64, floor: f64) -> Result<Self, SimError> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(SimError::Parameter(format!("trust smoothing {lambda} outside (0,1)")));
        }
        if !(0.0..1.0).contains(&floor) {
            return Err(SimError::Parameter(format!("trust floor {floor} outside [0,1)")));
        }
        Ok(TrustState { scores: vec![1.0; suppliers], lambda, floor })
    }

    /// Order shares derived from the scores; they sum to one.
    pub fn shares(&self) -> Vec<f64> {
        let total: f64 = self.scores.iter().sum();
        if total <= 0.0 {
            let n = self.scores.len().max(1) as f64;
            return vec![1.0 / n; self.scores.len()];
        }
        self.scores.iter().map(|s| s / total).collect()
    }
}

/// `new = (1 - λ)·old + λ·fill`, clamped to `[floor, 1]`.
pub fn trust_update(trust: &TrustState, fill_rates: &[f64]) -> Result<TrustState, SimError> {
    if fill_rates.len() != trust.scores.len() {
        return Err(SimError::Parameter(format!(
            "expected {} fill rates, got {}",
            trust.scores.len(),
            fill_rates.len()
        )));
    }
    if let Some(bad) = fill_rates.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(SimError::FillRate(*bad));
    }
    let scores = trust
        .scores
        .iter()
        .zip(fill_rates)
        .map(|(&old, &fill)| ((1.0 - trust.lambda) * old + trust.lambda * fill).clamp(trust.floor, 1.0))
        .collect();
    Ok(TrustState { scores, ..trust.clone() })
}

/// Splits a health center's order across its wholesalers.
pub fn split_demand(rule: SplitRule, total: u64, trust: &TrustState) -> Vec<u64> {
    match rule {
        SplitRule::Equal => largest_remainder(total, &vec![1; trust.scores.len()]),
        SplitRule::Trust => largest_remainder_real(total, &trust.scores),
    }
}

/// Allocation rule a supplier applies when it cannot cover every customer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationPolicy {
    Hc1First,
    Hc2First,
    Proportional,
}

impl std::str::FromStr for AllocationPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hc1-first" => Ok(AllocationPolicy::Hc1First),
            "hc2-first" => Ok(AllocationPolicy::Hc2First),
            "proportional" => Ok(AllocationPolicy::Proportional),
            other => Err(format!("unknown allocation policy {other:?}")),
        }
    }
}

/// Splits `on_hand` among customers whose demands are `demands` (ordered by
/// customer index, so HC1 precedes HC2).
///
/// When stock covers total demand every customer is served in full, whatever
/// the policy. Priority policies fill the favoured customer first and then
/// the rest in index order.
pub fn allocate(on_hand: u64, demands: &[u64], policy: AllocationPolicy) -> Vec<u64> {
    let total: u64 = demands.iter().sum();
    if on_hand >= total {
        return demands.to_vec();
    }
    match policy {
        AllocationPolicy::Proportional => largest_remainder(on_hand, demands),
        AllocationPolicy::Hc1First => priority_fill(on_hand, demands, 0),
        AllocationPolicy::Hc2First => priority_fill(on_hand, demands, 1),
    }
}

fn priority_fill(on_hand: u64, demands: &[u64], first: usize) -> Vec<u64> {
    let mut out = vec![0; demands.len()];
    let mut left = on_hand;
    let order = std::iter::once(first)
        .filter(|&f| f < demands.len())
        .chain((0..demands.len()).filter(|&i| i != first));
    for i in order {
        let give = left.min(demands[i]);
        out[i] = give;
        left -= give;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn suggestion_examples() {
        let v = PositionView { on_hand: 40, on_order: 30, backlog: 10 };
        assert_eq!(order_up_to_suggestion(v, 100), 40);
        let at_level = PositionView { on_hand: 60, on_order: 40, backlog: 0 };
        assert_eq!(order_up_to_suggestion(at_level, 100), 0);
        let above = PositionView { on_hand: 160, on_order: 40, backlog: 0 };
        assert_eq!(order_up_to_suggestion(above, 100), 0);
        let deep_backlog = PositionView { on_hand: 0, on_order: 0, backlog: 500 };
        assert_eq!(order_up_to_suggestion(deep_backlog, 100), 600);
    }

    #[test]
    fn split_examples() {
        let t = TrustState::new(2, 0.2, 0.05).unwrap();
        assert_eq!(split_demand(SplitRule::Equal, 100, &t), vec![50, 50]);
        assert_eq!(split_demand(SplitRule::Equal, 101, &t), vec![51, 50]);
        assert_eq!(split_demand(SplitRule::Trust, 100, &t), vec![50, 50]);
        let skew = TrustState { scores: vec![0.25, 0.75], ..t };
        assert_eq!(split_demand(SplitRule::Trust, 100, &skew), vec![25, 75]);
    }

    #[test]
    fn trust_examples() {
        let t = TrustState { scores: vec![1.0], lambda: 0.2, floor: 0.05 };
        let next = trust_update(&t, &[0.5]).unwrap();
        assert!((next.scores[0] - 0.9).abs() < 1e-12);

        let mut up = TrustState { scores: vec![0.3], ..t.clone() };
        let mut down = t.clone();
        for _ in 0..200 {
            up = trust_update(&up, &[1.0]).unwrap();
            down = trust_update(&down, &[0.0]).unwrap();
        }
        assert!((up.scores[0] - 1.0).abs() < 1e-12);
        assert_eq!(down.scores[0], 0.05);

        assert!(matches!(trust_update(&t, &[1.5]), Err(SimError::FillRate(_))));
        assert!(matches!(trust_update(&t, &[-0.1]), Err(SimError::FillRate(_))));
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate(80, &[60, 40], AllocationPolicy::Hc1First), vec![60, 20]);
        assert_eq!(allocate(80, &[60, 40], AllocationPolicy::Hc2First), vec![40, 40]);
        assert_eq!(allocate(80, &[60, 40], AllocationPolicy::Proportional), vec![48, 32]);
        assert_eq!(allocate(79, &[60, 40], AllocationPolicy::Proportional), vec![47, 32]);
        assert_eq!(allocate(120, &[60, 40], AllocationPolicy::Hc2First), vec![60, 40]);
    }

    #[test]
    fn remainder_ties_go_to_lower_index() {
        assert_eq!(largest_remainder(1, &[10, 10]), vec![1, 0]);
        assert_eq!(largest_remainder(5, &[1, 1, 1]), vec![2, 2, 1]);
        assert_eq!(largest_remainder(7, &[0, 0]), vec![0, 0]);
    }

    proptest! {
        #[test]
        fn allocation_is_complete_and_capped(
            on_hand in 0u64..500,
            demands in proptest::collection::vec(0u64..300, 1..4),
            p in 0usize..3,
        ) {
            let policy = [AllocationPolicy::Hc1First, AllocationPolicy::Hc2First, AllocationPolicy::Proportional][p];
            let out = allocate(on_hand, &demands, policy);
            let total: u64 = demands.iter().sum();
            prop_assert_eq!(out.iter().sum::<u64>(), on_hand.min(total));
            for (a, d) in out.iter().zip(&demands) {
                prop_assert!(a <= d);
            }
        }

        #[test]
        fn trust_shares_sum_to_one(
            fills in proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, 2), 0..50),
        ) {
            let mut t = TrustState::new(2, 0.2, 0.05).unwrap();
            for f in &fills {
                let next = trust_update(&t, f).unwrap();
                for ((n, o), fr) in next.scores.iter().zip(&t.scores).zip(f) {
                    prop_assert!(*n >= 0.05 && *n <= 1.0);
                    // EMA moves toward the observed fill rate
                    if *fr <= *o { prop_assert!(*n <= *o + 1e-12); }
                }
                t = next;
            }
            let shares = t.shares();
            prop_assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(shares.iter().all(|s| *s > 0.0 && *s < 1.0));
        }

        #[test]
        fn lower_fill_never_raises_trust(old in 0.05f64..=1.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let t = TrustState { scores: vec![old], lambda: 0.2, floor: 0.05 };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let tl = trust_update(&t, &[lo]).unwrap().scores[0];
            let th = trust_update(&t, &[hi]).unwrap().scores[0];
            prop_assert!(tl <= th);
        }

        #[test]
        fn split_sums_to_total(total in 0u64..10_000, w1 in 0.05f64..=1.0, w2 in 0.05f64..=1.0) {
            let t = TrustState { scores: vec![w1, w2], lambda: 0.2, floor: 0.05 };
            prop_assert_eq!(split_demand(SplitRule::Trust, total, &t).iter().sum::<u64>(), total);
            prop_assert_eq!(split_demand(SplitRule::Equal, total, &t).iter().sum::<u64>(), total);
        }
    }
}
