//! Quantitative analysis of thought-bubble data and decision logs.
//!
//! Numerical routines are generic over the scalar type; see the aliases at
//! the crate root for the usual `f64` instantiations.

mod chisq;
mod codebook;
mod contingency;
mod dataset;
mod fisher;
mod hmm;
mod kappa;
mod profile;
mod series;
pub mod special;
pub mod synthetic;

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub use chisq::{
    chi_square_independence, cramers_v, posthoc_bonferroni, BonferroniDivisor, CellTest, PosthocTable,
    Significance, TestResult,
};
pub use codebook::{codebook, Description, SaCode, SaLevel, Topic};
pub use contingency::ContingencyTable;
pub use dataset::{
    build_contingency, majority_vote, rater_agreement_matrix, read_coded_comments, read_players,
    write_coded_comments, write_players, CodedComment, Dataset, Grouping, PlayerRecord, MAJORITY_RATER,
};
pub use fisher::{fisher_exact, FisherMethod, FisherOptions, FisherResult, MonteCarlo};
pub use hmm::{FitOptions, FitReport, Hmm};
pub use kappa::{fleiss_kappa, rating_matrix};
pub use profile::{
    deviation_sequence, filter_outliers, k_medoids, profile_players, relative_deviation, BehaviorProfile,
    ClusterSummary, DecisionLog, DeviationSequence, ExclusionReason, Mode, OutlierReport, PlayerProfile,
    ProfileOptions, ProfilingReport, EXTREME_ORDER_FACTOR,
};
pub use series::{count_ratio_series, word_count, word_stats, CountRatioSeries, GroupSeries, WordStats};

/// Scalar type accepted by the numerical routines.
pub trait Real: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {}

impl<T> Real for T where T: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("no data")]
    Empty,
    #[error("table shape: {0}")]
    Shape(String),
    #[error("zero marginal total in {0}")]
    ZeroMarginal(String),
    #[error("unknown group: {0}")]
    UnknownGroup(String),
    #[error("group {0} has no players")]
    ZeroGroupSize(String),
    #[error("enumeration budget of {budget} tables exceeded and Monte Carlo is disabled")]
    BudgetExceeded { budget: u64 },
    #[error("item {item} has {found} ratings, expected {expected}")]
    InconsistentRaters { item: usize, expected: u32, found: u32 },
    #[error("code {0} is not in the codebook")]
    InvalidCode(String),
    #[error("player {player} has {weeks} ordering weeks, need {needed}")]
    TooShort { player: String, weeks: usize, needed: usize },
    #[error("degenerate model fit: {0}")]
    Degenerate(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("csv: {0}")]
    Csv(String),
}
