//! Per-week descriptive series: SA count ratios and comment lengths.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::codebook::SaLevel;
use super::dataset::{CodedComment, Dataset, Grouping};
use super::{AnalysisError, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSeries<T> {
    pub group: String,
    pub size: usize,
    /// `counts[level][week index]`
    pub counts: Vec<Vec<u64>>,
    /// counts divided by the group size
    pub ratios: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRatioSeries<T> {
    pub grouping: String,
    pub weeks: Vec<u32>,
    pub groups: Vec<GroupSeries<T>>,
}

impl<T: Real> CountRatioSeries<T> {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("group\tlevel\tweek\tcount\tratio\n");
        for g in &self.groups {
            for level in SaLevel::ALL {
                for (w, week) in self.weeks.iter().enumerate() {
                    out.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{:.4}\n",
                        g.group,
                        level.label(),
                        week,
                        g.counts[level.index()][w],
                        g.ratios[level.index()][w]
                    ));
                }
            }
        }
        out
    }
}

/// Number of tuples at each SA level per meeting week, divided by the number
/// of players in the group.
pub fn count_ratio_series<T: Real>(
    dataset: &Dataset,
    grouping: Grouping,
    weeks: &[u32],
) -> Result<CountRatioSeries<T>, AnalysisError> {
    let sizes = dataset.group_sizes(grouping)?;
    if let Some((g, _)) = sizes.iter().find(|(_, n)| *n == 0) {
        return Err(AnalysisError::ZeroGroupSize(g.clone()));
    }
    let keys = dataset.comment_groups(grouping)?;
    let mut groups: Vec<GroupSeries<T>> = sizes
        .iter()
        .map(|(g, n)| GroupSeries {
            group: g.clone(),
            size: *n,
            counts: vec![vec![0; weeks.len()]; SaLevel::ALL.len()],
            ratios: Vec::new(),
        })
        .collect();
    for (c, key) in dataset.comments.iter().zip(&keys) {
        let (Some(key), Some(w)) = (key, weeks.iter().position(|&w| w == c.week)) else { continue };
        let g = groups.iter_mut().find(|g| &g.group == key).expect("sizes cover every key");
        for code in &c.codes {
            g.counts[code.level.index()][w] += 1;
        }
    }
    for g in &mut groups {
        let n = T::from_usize(g.size).unwrap();
        g.ratios = g.counts.iter().map(|row| row.iter().map(|&x| T::from_u64(x).unwrap() / n).collect()).collect();
    }
    Ok(CountRatioSeries { grouping: grouping.name(), weeks: weeks.to_vec(), groups })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordStats<T> {
    pub comments: usize,
    pub mean: T,
    pub median: T,
    pub iqr: T,
    pub unanswered: usize,
    pub unanswered_rate: T,
    /// Distinct players with at least one unanswered prompt.
    pub players_unanswered: usize,
    /// Mean words per comment for each week present.
    pub per_week: Vec<(u32, T)>,
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Quantile with linear interpolation between order statistics.
fn quantile<T: Real>(sorted: &[T], q: T) -> T {
    if sorted.is_empty() {
        return T::nan();
    }
    let h = q * T::from_usize(sorted.len() - 1).unwrap();
    let lo = h.floor();
    let i = lo.to_usize().unwrap();
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i])
}

/// Comment-length statistics. Unanswered prompts count as zero words.
/// Statistics of an empty input are NaN.
pub fn word_stats<T: Real>(comments: &[CodedComment]) -> WordStats<T> {
    let t = |x: usize| T::from_usize(x).unwrap();
    let mut counts: Vec<T> = comments.iter().map(|c| t(word_count(&c.text))).collect();
    counts.sort_by(|a, b| a.partial_cmp(b).expect("word counts are finite"));
    let n = comments.len();
    let mean = if n == 0 { T::nan() } else { counts.iter().fold(T::zero(), |a, &b| a + b) / t(n) };
    let half = T::from_f64(0.5).unwrap();
    let iqr = quantile(&counts, T::from_f64(0.75).unwrap()) - quantile(&counts, T::from_f64(0.25).unwrap());
    let unanswered = comments.iter().filter(|c| c.is_unanswered()).count();
    let players_unanswered =
        comments.iter().filter(|c| c.is_unanswered()).map(|c| c.player.as_str()).collect::<BTreeSet<_>>().len();
    let mut by_week: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for c in comments {
        let e = by_week.entry(c.week).or_default();
        e.0 += word_count(&c.text);
        e.1 += 1;
    }
    WordStats {
        comments: n,
        mean,
        median: quantile(&counts, half),
        iqr,
        unanswered,
        unanswered_rate: if n == 0 { T::nan() } else { t(unanswered) / t(n) },
        players_unanswered,
        per_week: by_week.into_iter().map(|(w, (words, k))| (w, t(words) / t(k))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::codebook::{Description, SaCode, Topic};
    use crate::analysis::dataset::{PlayerRecord, MAJORITY_RATER};
    use crate::protocol::{InfoLevel, StudyTag};

    fn comment(player: &str, week: u32, text: &str, codes: Vec<SaCode>) -> CodedComment {
        CodedComment { player: player.into(), week, text: text.into(), rater: MAJORITY_RATER.into(), codes }
    }

    #[test]
    fn four_words() {
        let s = word_stats::<f64>(&[comment("p", 24, "we are doing fine", vec![])]);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.unanswered, 0);
    }

    #[test]
    fn all_empty_is_fully_unanswered() {
        let s = word_stats::<f64>(&[comment("p", 24, "", vec![]), comment("q", 28, "  ", vec![])]);
        assert_eq!(s.unanswered_rate, 1.0);
        assert_eq!(s.players_unanswered, 2);
        assert_eq!(s.mean, 0.0);
    }

    #[test]
    fn quartiles_interpolate() {
        let texts = ["a", "a b", "a b c", "a b c d", "a b c d e"];
        let cs: Vec<_> = texts.iter().map(|t| comment("p", 24, t, vec![])).collect();
        let s = word_stats::<f64>(&cs);
        assert_eq!(s.median, 3.0);
        assert_eq!(s.iqr, 2.0);
    }

    #[test]
    fn ten_players_five_codes() {
        let players: Vec<PlayerRecord> = (0..10)
            .map(|i| PlayerRecord {
                player: format!("p{i}"),
                study: StudyTag::Study1,
                disruption: Some(crate::protocol::DisruptionSite::Mn1),
                info: InfoLevel::None,
                profile: None,
            })
            .collect();
        let code = SaCode::new(SaLevel::Perception, Topic::Backlog, Description::Increase).unwrap();
        let comments = (0..5).map(|i| comment(&format!("p{i}"), 36, "backlog up", vec![code])).collect();
        let ds = Dataset { players, comments };
        let weeks = [24, 28, 32, 36];
        let s = count_ratio_series::<f64>(&ds, Grouping::Disruption, &weeks).unwrap();
        assert_eq!(s.groups[0].ratios[0], vec![0.0, 0.0, 0.0, 0.5]);
        assert!(s.groups[0].ratios[1].iter().all(|&x| x == 0.0));
    }
}
