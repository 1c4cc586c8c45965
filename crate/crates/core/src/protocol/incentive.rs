/// In-game profit per extra raffle ticket.
pub const PROFIT_PER_TICKET: f64 = 1000.0;

/// One ticket for finishing plus one per full $1000 of profit above the
/// cohort mean.
pub fn raffle_tickets(profit: f64, cohort_mean: f64) -> u64 {
    let extra = ((profit - cohort_mean) / PROFIT_PER_TICKET).floor();
    1 + extra.max(0.0) as u64
}

/// Mean profit over completed sessions; `None` for an empty cohort.
pub fn cohort_mean(profits: &[f64]) -> Option<f64> {
    (!profits.is_empty()).then(|| profits.iter().sum::<f64>() / profits.len() as f64)
}
