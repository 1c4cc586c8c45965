//! Deterministic coded-comment datasets whose per-group SA counts equal the
//! published contingency tables. These back the bundled fixtures.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::codebook::{Description as D, SaCode, SaLevel, Topic as T};
use super::dataset::{CodedComment, PlayerRecord, MAJORITY_RATER};
use super::profile::BehaviorProfile;
use crate::protocol::{DisruptionSite, InfoLevel, Schedule, StudyTag};
use crate::sim::largest_remainder;

/// Share of prompts left blank in generated data.
const UNANSWERED_SHARE: f64 = 0.055;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSpec {
    pub disruption: Option<DisruptionSite>,
    pub info: InfoLevel,
    pub profile: Option<BehaviorProfile>,
    pub players: usize,
    /// Tuples at perception, comprehension, projection.
    pub counts: [u64; 3],
}

/// Study 1 design cells. Only the disruption and info margins are
/// published, so the joint split of each level follows the info margin
/// in proportion.
pub fn study1_cells() -> Vec<CellSpec> {
    let info = [(InfoLevel::None, [32, 237, 27]), (InfoLevel::Partial, [80, 246, 51]), (InfoLevel::Complete, [60, 244, 34])];
    let mn1 = [69u64, 358, 38];
    let players = [(17, 19), (20, 21), (18, 20)];
    let mut split = [[0u64; 3]; 3];
    for level in 0..3 {
        let weights: Vec<u64> = info.iter().map(|(_, c)| c[level]).collect();
        for (i, x) in largest_remainder(mn1[level], &weights).into_iter().enumerate() {
            split[i][level] = x;
        }
    }
    let mut cells = Vec::new();
    for (i, (level, totals)) in info.iter().enumerate() {
        let a = split[i];
        let b = [totals[0] - a[0], totals[1] - a[1], totals[2] - a[2]];
        cells.push(CellSpec { disruption: Some(DisruptionSite::Mn1), info: *level, profile: None, players: players[i].0, counts: a });
        cells.push(CellSpec { disruption: Some(DisruptionSite::Mn2), info: *level, profile: None, players: players[i].1, counts: b });
    }
    cells
}

/// Study 2 cells: every player saw an MN1 disruption.
pub fn study2_cells() -> Vec<CellSpec> {
    use BehaviorProfile::*;
    let rows = [
        (Hoarder, InfoLevel::Partial, 25, [57, 163, 36]),
        (Hoarder, InfoLevel::None, 31, [31, 224, 20]),
        (Reactor, InfoLevel::Partial, 27, [21, 185, 14]),
        (Reactor, InfoLevel::None, 21, [39, 148, 28]),
        (Follower, InfoLevel::Partial, 8, [3, 46, 2]),
        (Follower, InfoLevel::None, 9, [1, 49, 2]),
    ];
    rows.into_iter()
        .map(|(p, info, players, counts)| CellSpec {
            disruption: Some(DisruptionSite::Mn1),
            info,
            profile: Some(p),
            players,
            counts,
        })
        .collect()
}

fn phrases(level: SaLevel) -> &'static [(T, D, &'static str)] {
    match level {
        SaLevel::Perception => &[
            (T::Backlog, D::Increase, "backlog keeps going up"),
            (T::Profit, D::Decrease, "profit went down"),
            (T::InventoryCost, D::Increase, "inventory cost goes high"),
            (T::Demand, D::Increase, "demand increased"),
            (T::Inventory, D::Decrease, "inventory is dropping"),
            (T::BacklogCost, D::Increase, "backlog cost is rising"),
            (T::Profit, D::Consistent, "profit was constant"),
            (T::Order, D::OverOrder, "we ordered too much"),
        ],
        SaLevel::Comprehension => &[
            (T::General, D::Positive, "good"),
            (T::General, D::Negative, "not good"),
            (T::General, D::Neutral, "fine"),
            (T::Inventory, D::Positive, "enough safety stock in hand"),
            (T::Demand, D::Uncertain, "not sure what the demand is doing"),
            (T::SupplyLine, D::Negative, "our supplier is letting us down"),
        ],
        SaLevel::Projection => &[
            (T::General, D::Improve, "we will do better next month"),
            (T::General, D::AnticipateProblem, "expecting trouble ahead"),
            (T::Demand, D::Increase, "we have to prepare for more demand"),
            (T::Inventory, D::Increase, "need to build up inventory"),
            (T::Allocation, D::Proportionally, "will split shipments proportionally"),
            (T::Order, D::Uncertain, "unsure how much to order next"),
        ],
    }
}

fn phrase_of(code: &SaCode) -> &'static str {
    phrases(code.level)
        .iter()
        .find(|(t, d, _)| *t == code.topic && *d == code.description)
        .map(|(_, _, p)| *p)
        .unwrap_or("hard to say")
}

/// A code of `level` not already in `taken`, starting the search at a
/// random phrase.
fn pick_code<R: Rng>(rng: &mut R, level: SaLevel, taken: &[SaCode]) -> SaCode {
    let list = phrases(level);
    let start = rng.gen_range(0..list.len());
    (0..list.len())
        .map(|k| list[(start + k) % list.len()])
        .map(|(topic, description, _)| SaCode { level, topic, description })
        .chain(SaCode::all_valid().into_iter().filter(|c| c.level == level))
        .find(|c| !taken.contains(c))
        .expect("the codebook has more codes per level than any comment holds")
}

/// Resolved (single-rater) dataset for the given cells.
pub fn generate(study: StudyTag, cells: &[CellSpec], seed: u64) -> (Vec<PlayerRecord>, Vec<CodedComment>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weeks = Schedule::default().meeting_weeks;
    let prefix = match study {
        StudyTag::Study1 => "PL1",
        StudyTag::Study2 => "PL2",
    };
    let mut players = Vec::new();
    let mut comments = Vec::new();
    let mut next_id = 1;
    for cell in cells {
        let ids: Vec<String> = (0..cell.players)
            .map(|_| {
                let id = format!("{prefix}-{next_id:03}");
                next_id += 1;
                id
            })
            .collect();
        for id in &ids {
            players.push(PlayerRecord {
                player: id.clone(),
                study,
                disruption: cell.disruption,
                info: cell.info,
                profile: cell.profile,
            });
        }
        let mut slots: Vec<(usize, usize)> = (0..ids.len()).flat_map(|p| (0..weeks.len()).map(move |w| (p, w))).collect();
        slots.shuffle(&mut rng);
        let total: u64 = cell.counts.iter().sum();
        let blank = (slots.len() as f64 * UNANSWERED_SHARE).round() as usize;
        let answered = (slots.len() - blank).min(total as usize);
        let mut levels: Vec<SaLevel> = SaLevel::ALL
            .iter()
            .zip(cell.counts)
            .flat_map(|(&l, n)| std::iter::repeat_n(l, n as usize))
            .collect();
        levels.shuffle(&mut rng);
        let mut codes: Vec<Vec<SaCode>> = vec![Vec::new(); slots.len()];
        for (k, level) in levels.into_iter().enumerate() {
            let slot = if k < answered { k } else { rng.gen_range(0..answered) };
            let code = pick_code(&mut rng, level, &codes[slot]);
            codes[slot].push(code);
        }
        let mut cell_comments: Vec<CodedComment> = slots
            .iter()
            .zip(codes)
            .map(|(&(p, w), codes)| {
                let text = codes.iter().map(phrase_of).collect::<Vec<_>>().join(". ");
                CodedComment { player: ids[p].clone(), week: weeks[w], text, rater: MAJORITY_RATER.into(), codes }
            })
            .collect();
        cell_comments.sort_by(|a, b| (&a.player, a.week).cmp(&(&b.player, b.week)));
        comments.extend(cell_comments);
    }
    (players, comments)
}

/// Splits resolved comments into three raters whose majority vote gives
/// back the input: each rater deviates alone on some comments.
pub fn three_raters(resolved: &[CodedComment]) -> Vec<CodedComment> {
    let mut out = Vec::with_capacity(resolved.len() * 3);
    for (i, c) in resolved.iter().enumerate() {
        let mut r1 = c.clone();
        r1.rater = "r1".into();
        let mut r2 = c.clone();
        r2.rater = "r2".into();
        let mut r3 = c.clone();
        r3.rater = "r3".into();
        if !c.codes.is_empty() {
            if i % 9 == 0 {
                let extra = SaCode { level: SaLevel::Projection, topic: T::Allocation, description: D::Hc2 };
                if !r2.codes.contains(&extra) {
                    r2.codes.push(extra);
                }
            }
            if i % 5 == 0 {
                r3.codes.pop();
            }
            if i % 11 == 0 {
                let extra = SaCode { level: SaLevel::Perception, topic: T::Costs, description: D::Zero };
                if !r3.codes.contains(&extra) {
                    r3.codes.insert(0, extra);
                }
            }
        }
        out.extend([r1, r2, r3]);
    }
    out
}

pub const STUDY1_SEED: u64 = 2023;
pub const STUDY2_SEED: u64 = 2024;

pub fn study1() -> (Vec<PlayerRecord>, Vec<CodedComment>) {
    generate(StudyTag::Study1, &study1_cells(), STUDY1_SEED)
}

/// Study 2 with three raters per comment.
pub fn study2() -> (Vec<PlayerRecord>, Vec<CodedComment>) {
    let (players, resolved) = generate(StudyTag::Study2, &study2_cells(), STUDY2_SEED);
    (players, three_raters(&resolved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::dataset::majority_vote;

    #[test]
    fn study1_cells_respect_both_margins() {
        let cells = study1_cells();
        let sum = |f: &dyn Fn(&CellSpec) -> bool| {
            cells.iter().filter(|c| f(c)).fold([0u64; 3], |mut a, c| {
                for l in 0..3 {
                    a[l] += c.counts[l];
                }
                a
            })
        };
        assert_eq!(sum(&|c| c.disruption == Some(DisruptionSite::Mn1)), [69, 358, 38]);
        assert_eq!(sum(&|c| c.disruption == Some(DisruptionSite::Mn2)), [103, 369, 74]);
        assert_eq!(sum(&|c| c.info == InfoLevel::Partial), [80, 246, 51]);
        assert_eq!(cells.iter().map(|c| c.players).sum::<usize>(), 115);
    }

    #[test]
    fn majority_of_three_raters_recovers_resolved_codes() {
        let (_, resolved) = generate(StudyTag::Study2, &study2_cells(), STUDY2_SEED);
        let mut back = majority_vote(&three_raters(&resolved));
        let mut want = resolved.clone();
        for c in want.iter_mut().chain(back.iter_mut()) {
            c.codes.sort();
        }
        want.sort_by(|a, b| (&a.player, a.week).cmp(&(&b.player, b.week)));
        assert_eq!(back, want);
    }

    #[test]
    fn unanswered_prompts_have_no_codes() {
        let (_, comments) = study1();
        assert!(comments.iter().filter(|c| c.is_unanswered()).all(|c| c.codes.is_empty()));
        let blank = comments.iter().filter(|c| c.is_unanswered()).count();
        assert!(blank > 0 && blank < comments.len() / 10);
    }
}
