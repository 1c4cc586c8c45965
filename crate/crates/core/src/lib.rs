//! Engine for a supply-chain gamette with thought-bubble prompts: the weekly
//! flow simulator, the experiment protocol, a session service with an
//! append-only event log, and the analysis toolkit.

pub mod analysis;
pub mod protocol;
pub mod session;
pub mod sim;

pub use analysis::Real;

pub type TestResult = analysis::TestResult<f64>;
pub type PosthocTable = analysis::PosthocTable<f64>;
pub type FisherResult = analysis::FisherResult<f64>;
pub type Hmm = analysis::Hmm<f64>;
pub type HmmF32 = analysis::Hmm<f32>;
pub type CountRatioSeries = analysis::CountRatioSeries<f64>;
pub type WordStats = analysis::WordStats<f64>;
