//! The analysis pipeline: contingency tests on coded comments, descriptive
//! series, rater agreement, and behavior profiling of session logs.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use gamette_core::analysis::{
    build_contingency, chi_square_independence, count_ratio_series, cramers_v, filter_outliers, fisher_exact,
    fleiss_kappa, majority_vote, posthoc_bonferroni, profile_players, rater_agreement_matrix, read_coded_comments,
    read_players, word_stats, AnalysisError, BehaviorProfile, BonferroniDivisor, ClusterSummary, CodedComment,
    ContingencyTable, Dataset, DecisionLog, FisherOptions, FisherResult, Grouping, OutlierReport, PlayerProfile,
    PosthocTable, ProfileOptions, TestResult, WordStats,
};
use gamette_core::protocol::{Schedule, StudyTag};
use gamette_core::session::{EventStore, FileStore};
use serde::Serialize;

use crate::cohort::Manifest;
use crate::provenance::{write_json, write_table, Provenance};

pub const STUDY1_PLAYERS: &str = include_str!("../../../fixtures/study1_players.csv");
pub const STUDY1_COMMENTS: &str = include_str!("../../../fixtures/study1_comments.csv");
pub const STUDY2_PLAYERS: &str = include_str!("../../../fixtures/study2_players.csv");
pub const STUDY2_COMMENTS: &str = include_str!("../../../fixtures/study2_comments.csv");

/// Bundled (players, comments) CSV text for a study.
pub fn fixture(study: StudyTag) -> (&'static str, &'static str) {
    match study {
        StudyTag::Study1 => (STUDY1_PLAYERS, STUDY1_COMMENTS),
        StudyTag::Study2 => (STUDY2_PLAYERS, STUDY2_COMMENTS),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableReport {
    pub name: String,
    pub table: ContingencyTable,
    pub expected: Vec<Vec<f64>>,
    pub test: TestResult<f64>,
    pub cramers_v: f64,
    pub posthoc: PosthocTable<f64>,
    /// Run when some expected count is below 5.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fisher: Option<FisherResult<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommentReport {
    pub players: usize,
    pub comments: usize,
    pub raters: usize,
    pub tables: Vec<TableReport>,
    /// Tables that could not be tested, with the reason.
    pub skipped: Vec<(String, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub words: WordStats<f64>,
}

impl CommentReport {
    pub fn table(&self, name: &str) -> Option<&TableReport> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct CommentOptions {
    pub divisor: BonferroniDivisor,
    pub fisher: FisherOptions,
    pub schedule: Schedule,
}

impl Default for CommentOptions {
    fn default() -> Self {
        CommentOptions { divisor: BonferroniDivisor::Columns, fisher: FisherOptions::default(), schedule: Schedule::default() }
    }
}

/// Groupings worth testing: each must split the players into two or more groups.
fn groupings(ds: &Dataset) -> Vec<Grouping> {
    let mut all = vec![Grouping::Disruption, Grouping::Info, Grouping::Profile];
    all.extend(BehaviorProfile::ALL.iter().map(|&p| Grouping::InfoWithinProfile(p)));
    all.into_iter().filter(|&g| ds.group_sizes(g).map(|s| s.len() >= 2).unwrap_or(false)).collect()
}

pub fn analyze_comments(players: &str, comments: &str, opts: &CommentOptions) -> Result<(Dataset, CommentReport), AnalysisError> {
    let players = read_players(players.as_bytes())?;
    let raw: Vec<CodedComment> = read_coded_comments(comments.as_bytes(), &opts.schedule)?;
    if raw.is_empty() || players.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let raters: BTreeSet<&str> = raw.iter().map(|c| c.rater.as_str()).collect();
    let kappa = if raters.len() > 1 { Some(fleiss_kappa::<f64>(&rater_agreement_matrix(&raw)?)?) } else { None };
    let resolved = if raters.len() > 1 { majority_vote(&raw) } else { raw.clone() };
    let ds = Dataset { players, comments: resolved };
    let mut tables = Vec::new();
    let mut skipped = Vec::new();
    for g in groupings(&ds) {
        let table = build_contingency(&ds, g)?;
        let test = match chi_square_independence::<f64>(&table) {
            Ok(t) => t,
            Err(e) => {
                skipped.push((g.name(), e.to_string()));
                continue;
            }
        };
        let fisher = if test.assumption_violated() { Some(fisher_exact::<f64>(&table, &opts.fisher)?) } else { None };
        tables.push(TableReport {
            name: g.name(),
            expected: table.expected(),
            cramers_v: cramers_v(test.statistic, test.n, table.n_rows(), table.n_cols()),
            posthoc: posthoc_bonferroni(&table, opts.divisor)?,
            test,
            fisher,
            table,
        });
    }
    let report = CommentReport {
        players: ds.players.len(),
        comments: ds.comments.len(),
        raters: raters.len(),
        tables,
        skipped,
        kappa,
        words: word_stats(&ds.comments),
    };
    Ok((ds, report))
}

fn posthoc_tsv(t: &TableReport) -> String {
    let mut out = String::from("group\tlevel\tresidual\tp\tadjusted_p\tflag\n");
    for (i, row) in t.posthoc.cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{:.6}\t{:.6}\t{}",
                t.table.rows()[i],
                t.table.cols()[j],
                c.residual,
                c.p_value,
                c.adjusted_p,
                c.flag.stars()
            );
        }
    }
    out
}

fn tests_tsv(r: &CommentReport) -> String {
    let mut out = String::from("table\tchi2\tdf\tp\tcramers_v\tn\tlow_expected_cells\tfisher_p\n");
    for t in &r.tables {
        let _ = writeln!(
            out,
            "{}\t{:.4}\t{}\t{:.6}\t{:.4}\t{}\t{}\t{}",
            t.name,
            t.test.statistic,
            t.test.df,
            t.test.p_value,
            t.cramers_v,
            t.test.n,
            t.test.low_expected_cells,
            t.fisher.map(|f| format!("{:.6}", f.p_value)).unwrap_or_default()
        );
    }
    out
}

fn expected_tsv(t: &TableReport) -> String {
    let mut out = format!("group\t{}\n", t.table.cols().join("\t"));
    for (i, row) in t.expected.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.2}")).collect();
        let _ = writeln!(out, "{}\t{}", t.table.rows()[i], cells.join("\t"));
    }
    out
}

/// Writes every comment-analysis output into `out`.
pub fn write_comment_outputs(out: &Path, prov: &Provenance, ds: &Dataset, r: &CommentReport, schedule: &Schedule) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    write_table(out, "tests.tsv", prov, &tests_tsv(r))?;
    for t in &r.tables {
        write_table(out, &format!("contingency-{}.tsv", t.name), prov, &t.table.to_tsv())?;
        write_table(out, &format!("expected-{}.tsv", t.name), prov, &expected_tsv(t))?;
        write_table(out, &format!("posthoc-{}.tsv", t.name), prov, &posthoc_tsv(t))?;
        let grouping = groupings(ds).into_iter().find(|g| g.name() == t.name).expect("table came from a grouping");
        let series = count_ratio_series::<f64>(ds, grouping, &schedule.meeting_weeks)?;
        write_table(out, &format!("count-ratio-{}.tsv", t.name), prov, &series.to_tsv())?;
    }
    let mut words = String::from("week\tmean_words\n");
    for (w, m) in &r.words.per_week {
        let _ = writeln!(words, "{w}\t{m:.3}");
    }
    write_table(out, "word-count.tsv", prov, &words)?;
    write_json(out, "comments.json", prov, r)?;
    Ok(())
}

pub fn summarize_comments(r: &CommentReport) -> String {
    let mut s = format!("{} players, {} comments, {} rater(s)\n", r.players, r.comments, r.raters);
    for t in &r.tables {
        let _ = write!(
            s,
            "{}: chi2={:.3} df={} p={:.5} V={:.3}",
            t.name, t.test.statistic, t.test.df, t.test.p_value, t.cramers_v
        );
        if let Some(f) = t.fisher {
            let _ = write!(s, " fisher_p={:.4}", f.p_value);
        }
        let flags: Vec<String> = t
            .posthoc
            .flags()
            .iter()
            .zip(t.table.rows())
            .map(|(row, g)| format!("{g}[{}]", row.iter().map(|f| if f.stars().is_empty() { "-" } else { f.stars() }).collect::<Vec<_>>().join(" ")))
            .collect();
        let _ = writeln!(s, "  {}", flags.join(" "));
    }
    for (name, why) in &r.skipped {
        let _ = writeln!(s, "{name}: not tested ({why})");
    }
    if let Some(k) = r.kappa {
        let _ = writeln!(s, "fleiss kappa: {k:.4}");
    }
    let w = &r.words;
    let _ = writeln!(
        s,
        "words per comment: mean {:.2}, median {:.1}, IQR {:.1}; unanswered {} ({:.1}%)",
        w.mean,
        w.median,
        w.iqr,
        w.unanswered,
        100.0 * w.unanswered_rate
    );
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileRun {
    pub sessions: usize,
    pub outliers: OutlierReport,
    pub players: Vec<PlayerProfile>,
    pub clusters: Vec<ClusterSummary>,
    pub log_likelihood: f64,
    /// Share of kept players whose planted profile was recovered.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    /// Planted outliers that slipped through the filter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missed_outliers: Option<Vec<String>>,
}

/// Loads every session log under `dir`.
pub fn load_decision_logs(dir: &Path) -> anyhow::Result<Vec<DecisionLog>> {
    let store = FileStore::open(dir)?;
    let mut logs = Vec::new();
    for id in store.sessions()? {
        let events = store.load(&id)?;
        logs.push(DecisionLog::from_events(&events).with_context(|| format!("session {id}"))?);
    }
    Ok(logs)
}

pub fn profile_logs(
    logs: Vec<DecisionLog>,
    manifest: Option<&Manifest>,
    schedule: &Schedule,
    opts: &ProfileOptions,
) -> Result<ProfileRun, AnalysisError> {
    if logs.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let sessions = logs.len();
    let (kept, outliers) = filter_outliers(logs, schedule);
    let report = profile_players(&kept, schedule, opts)?;
    let (accuracy, missed) = match manifest {
        Some(m) => {
            let planted: HashMap<String, BehaviorProfile> = m.planted();
            let excluded = outliers.excluded_players();
            let missed: Vec<String> = m
                .sessions
                .iter()
                .filter(|e| e.outlier && !excluded.contains(e.session.as_str()))
                .map(|e| e.session.clone())
                .collect();
            (Some(report.accuracy(&planted)), Some(missed))
        }
        None => (None, None),
    };
    Ok(ProfileRun {
        sessions,
        outliers,
        players: report.players,
        clusters: report.clusters,
        log_likelihood: report.log_likelihood,
        accuracy,
        missed_outliers: missed,
    })
}

pub fn write_profile_outputs(out: &Path, prov: &Provenance, run: &ProfileRun) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    let mut csv = String::from("player,cluster,profile\n");
    for p in &run.players {
        let _ = writeln!(csv, "{},{},{}", p.player, p.cluster, p.profile.as_str());
    }
    write_table(out, "profiles.csv", prov, &csv)?;
    write_json(out, "profiles.json", prov, run)?;
    Ok(())
}

pub fn summarize_profiles(run: &ProfileRun) -> String {
    let mut s = format!("{} sessions, {} excluded as outliers\n", run.sessions, run.outliers.excluded.len());
    for c in &run.clusters {
        let _ = writeln!(
            s,
            "cluster {} ({} players): follow {:.2}, over before notice {:.2}, after {:.2}",
            c.profile.label(),
            c.members,
            c.follow,
            c.over_before_notice,
            c.over_after_notice
        );
    }
    if let Some(a) = run.accuracy {
        let _ = writeln!(s, "planted profiles recovered: {:.1}%", 100.0 * a);
    }
    if let Some(m) = &run.missed_outliers {
        let _ = writeln!(s, "planted outliers missed: {}", m.len());
    }
    s
}

/// Published figures the bundled fixtures must reproduce.
pub mod published {
    use gamette_core::analysis::Significance::{self, None as N, P01, P05};
    use gamette_core::protocol::StudyTag;

    pub struct Target {
        pub table: &'static str,
        pub chi2: f64,
        pub df: u32,
        pub cramers_v: f64,
        pub flags: Vec<Vec<Significance>>,
        pub fisher_p: Option<f64>,
    }

    pub const CHI2_TOL: f64 = 0.01;
    pub const V_TOL: f64 = 0.001;
    pub const FISHER_TOL: f64 = 0.02;

    pub fn targets(study: StudyTag) -> Vec<Target> {
        let t = |table, chi2, df, cramers_v, flags: Vec<[Significance; 3]>, fisher_p| Target {
            table,
            chi2,
            df,
            cramers_v,
            flags: flags.into_iter().map(|r| r.to_vec()).collect(),
            fisher_p,
        };
        match study {
            StudyTag::Study1 => vec![
                t("disruption", 12.047, 2, 0.109, vec![[N, P01, P05], [N, P01, P05]], None),
                t("info", 19.172, 4, 0.097, vec![[N, N, N], [P05, P01, N], [P01, P01, N]], None),
            ],
            StudyTag::Study2 => vec![
                t("profile", 18.132, 4, 0.092, vec![[N, P05, N], [N, N, N], [P01, P01, N]], None),
                t("info-within-hoarder", 21.216, 2, 0.200, vec![[P01, P01, P05], [P01, P01, P05]], None),
                t("info-within-reactor", 14.122, 2, 0.180, vec![[P05, P01, N], [P05, P01, N]], None),
                t("info-within-follower", 1.085, 2, 0.103, vec![[N, N, N], [N, N, N]], Some(0.65)),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Compares a comment report with the published tables for `study`.
pub fn check_published(r: &CommentReport, study: StudyTag) -> Vec<CheckLine> {
    let mut lines = Vec::new();
    for target in published::targets(study) {
        let name = target.table.to_string();
        let Some(t) = r.table(target.table) else {
            lines.push(CheckLine { name, pass: false, detail: "table missing".into() });
            continue;
        };
        let chi_ok = (t.test.statistic - target.chi2).abs() <= published::CHI2_TOL && t.test.df == target.df;
        let v_ok = (t.cramers_v - target.cramers_v).abs() <= published::V_TOL;
        let flags_ok = t.posthoc.flags() == target.flags;
        let fisher_ok = match (target.fisher_p, t.fisher) {
            (Some(want), Some(f)) => (f.p_value - want).abs() <= published::FISHER_TOL,
            (Some(_), None) => false,
            (None, _) => true,
        };
        lines.push(CheckLine {
            name,
            pass: chi_ok && v_ok && flags_ok && fisher_ok,
            detail: format!(
                "chi2 {:.3} (want {}), V {:.3} (want {}), flags {}{}",
                t.test.statistic,
                target.chi2,
                t.cramers_v,
                target.cramers_v,
                if flags_ok { "match" } else { "differ" },
                t.fisher.map(|f| format!(", fisher p {:.4}", f.p_value)).unwrap_or_default()
            ),
        });
    }
    lines
}

/// The study a player file belongs to, if it holds only one.
pub fn single_study(ds: &Dataset) -> Option<StudyTag> {
    let first = ds.players.first()?.study;
    ds.players.iter().all(|p| p.study == first).then_some(first)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_pass_their_published_checks() {
        for study in [StudyTag::Study1, StudyTag::Study2] {
            let (p, c) = fixture(study);
            let (ds, r) = analyze_comments(p, c, &CommentOptions::default()).unwrap();
            assert_eq!(single_study(&ds), Some(study));
            for line in check_published(&r, study) {
                assert!(line.pass, "{study:?} {}: {}", line.name, line.detail);
            }
        }
    }

    #[test]
    fn empty_comments_are_no_data() {
        let header = "player,week,text,rater,level,topic,description\n";
        let err = analyze_comments(STUDY1_PLAYERS, header, &CommentOptions::default()).unwrap_err();
        assert_eq!(err, AnalysisError::Empty);
    }

    #[test]
    fn study2_reports_kappa() {
        let (p, c) = fixture(StudyTag::Study2);
        let (_, r) = analyze_comments(p, c, &CommentOptions::default()).unwrap();
        assert_eq!(r.raters, 3);
        assert!(r.kappa.unwrap() > 0.6);
        assert!(r.table("info-within-follower").unwrap().fisher.is_some());
        assert!(summarize_comments(&r).contains("info-within-hoarder: chi2=21.21"));
    }

    #[test]
    fn wrong_flags_fail_the_check() {
        let (p, c) = fixture(StudyTag::Study1);
        let opts = CommentOptions { divisor: BonferroniDivisor::Cells, ..CommentOptions::default() };
        let (_, r) = analyze_comments(p, c, &opts).unwrap();
        let lines = check_published(&r, StudyTag::Study1);
        assert!(lines.iter().any(|l| !l.pass));
    }
}
