//! Fisher's exact test for r x c tables.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::contingency::ContingencyTable;
use super::special::ln_factorial;
use super::{AnalysisError, Real};

/// Relative slack when comparing table probabilities, so that tables tied
/// with the observed one in exact arithmetic count as "as extreme".
const TIE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub seed: u64,
    pub draws: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo { seed: 0, draws: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FisherOptions {
    /// Most tables to enumerate before giving up on the exact answer.
    pub budget: u64,
    pub monte_carlo: Option<MonteCarlo>,
}

impl Default for FisherOptions {
    fn default() -> Self {
        FisherOptions { budget: 20_000_000, monte_carlo: Some(MonteCarlo::default()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FisherMethod {
    Exact { tables: u64 },
    MonteCarlo { seed: u64, draws: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherResult<T> {
    pub p_value: T,
    pub method: FisherMethod,
}

struct Margins {
    rows: Vec<u64>,
    cols: Vec<u64>,
    /// ln(prod r_i! prod c_j! / N!)
    ln_const: f64,
}

impl Margins {
    fn of(table: &ContingencyTable) -> Margins {
        let rows = table.row_totals();
        let cols = table.col_totals();
        let ln_const = rows.iter().chain(&cols).map(|&x| ln_factorial::<f64>(x)).sum::<f64>()
            - ln_factorial::<f64>(table.total());
        Margins { rows, cols, ln_const }
    }

    fn ln_prob(&self, cells: impl Iterator<Item = u64>) -> f64 {
        self.ln_const - cells.map(ln_factorial::<f64>).sum::<f64>()
    }
}

struct Enumerator<'a> {
    m: &'a Margins,
    threshold: f64,
    budget: u64,
    tables: u64,
    p: f64,
    col_left: Vec<u64>,
    /// Sum of ln(cell!) over the rows filled so far.
    acc: f64,
}

impl Enumerator<'_> {
    fn rows(&mut self, i: usize) -> Result<(), ()> {
        let r = self.m.rows.len();
        if i == r - 1 {
            // The last row is forced by the column remainders.
            self.tables += 1;
            if self.tables > self.budget {
                return Err(());
            }
            let last: f64 = self.col_left.iter().map(|&x| ln_factorial::<f64>(x)).sum();
            let lp = self.m.ln_const - self.acc - last;
            if lp <= self.threshold {
                self.p += lp.exp();
            }
            return Ok(());
        }
        self.fill(i, 0, self.m.rows[i])
    }

    fn fill(&mut self, i: usize, j: usize, left: u64) -> Result<(), ()> {
        let c = self.m.cols.len();
        if j == c - 1 {
            if left > self.col_left[j] {
                return Ok(());
            }
            self.col_left[j] -= left;
            let lf = ln_factorial::<f64>(left);
            self.acc += lf;
            let res = self.rows(i + 1);
            self.acc -= lf;
            self.col_left[j] += left;
            return res;
        }
        // What the later columns can still absorb bounds this cell from below.
        let room_after: u64 = self.col_left[j + 1..].iter().sum();
        let lo = left.saturating_sub(room_after);
        let hi = left.min(self.col_left[j]);
        for x in lo..=hi {
            self.col_left[j] -= x;
            let lf = ln_factorial::<f64>(x);
            self.acc += lf;
            let res = self.fill(i, j + 1, left - x);
            self.acc -= lf;
            self.col_left[j] += x;
            res?;
        }
        Ok(())
    }
}

/// Sum of probabilities of all margin-preserving tables no more likely than
/// the observed one.
pub fn fisher_exact<T: Real>(table: &ContingencyTable, opts: &FisherOptions) -> Result<FisherResult<T>, AnalysisError> {
    table.check_testable()?;
    let m = Margins::of(table);
    let observed = m.ln_prob(table.counts().iter().flatten().copied());
    let threshold = observed + TIE_TOLERANCE;
    let mut e = Enumerator {
        m: &m,
        threshold,
        budget: opts.budget,
        tables: 0,
        p: 0.0,
        col_left: m.cols.clone(),
        acc: 0.0,
    };
    match e.rows(0) {
        Ok(()) => Ok(FisherResult {
            p_value: T::from_f64(e.p.min(1.0)).unwrap(),
            method: FisherMethod::Exact { tables: e.tables },
        }),
        Err(()) => match opts.monte_carlo {
            Some(mc) => Ok(monte_carlo(&m, threshold, mc)),
            None => Err(AnalysisError::BudgetExceeded { budget: opts.budget }),
        },
    }
}

/// Samples tables with the observed margins by dealing a shuffled deck of
/// column labels out to the rows.
fn monte_carlo<T: Real>(m: &Margins, threshold: f64, mc: MonteCarlo) -> FisherResult<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    let mut deck: Vec<usize> = m.cols.iter().enumerate().flat_map(|(j, &c)| std::iter::repeat_n(j, c as usize)).collect();
    let (r, c) = (m.rows.len(), m.cols.len());
    let mut cells = vec![0u64; r * c];
    let mut hits = 0u64;
    for _ in 0..mc.draws {
        deck.shuffle(&mut rng);
        cells.iter_mut().for_each(|x| *x = 0);
        let mut k = 0;
        for (i, &rt) in m.rows.iter().enumerate() {
            for &col in &deck[k..k + rt as usize] {
                cells[i * c + col] += 1;
            }
            k += rt as usize;
        }
        if m.ln_prob(cells.iter().copied()) <= threshold {
            hits += 1;
        }
    }
    let p = (hits + 1) as f64 / (mc.draws + 1) as f64;
    FisherResult { p_value: T::from_f64(p).unwrap(), method: FisherMethod::MonteCarlo { seed: mc.seed, draws: mc.draws } }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(c: Vec<Vec<u64>>) -> ContingencyTable {
        ContingencyTable::from_counts(c).unwrap()
    }

    #[test]
    fn all_equal_two_by_two() {
        let r = fisher_exact::<f64>(&table(vec![vec![4, 4], vec![4, 4]]), &FisherOptions::default()).unwrap();
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_separation_by_hand() {
        // Margins 5/5 by 5/5: P(table with a in the corner) = C(5,a) C(5,5-a) / C(10,5).
        // The two extreme tables each have 1/252.
        let r = fisher_exact::<f64>(&table(vec![vec![5, 0], vec![0, 5]]), &FisherOptions::default()).unwrap();
        assert!((r.p_value - 2.0 / 252.0).abs() < 1e-12);
        assert_eq!(r.method, FisherMethod::Exact { tables: 6 });
    }

    #[test]
    fn budget_exhaustion() {
        let t = table(vec![vec![3, 46, 2], vec![1, 49, 2]]);
        let opts = FisherOptions { budget: 5, monte_carlo: None };
        assert!(matches!(fisher_exact::<f64>(&t, &opts), Err(AnalysisError::BudgetExceeded { budget: 5 })));
        let opts = FisherOptions { budget: 5, monte_carlo: Some(MonteCarlo { seed: 1, draws: 20_000 }) };
        let mc = fisher_exact::<f64>(&t, &opts).unwrap();
        let exact = fisher_exact::<f64>(&t, &FisherOptions::default()).unwrap();
        assert!((mc.p_value - exact.p_value).abs() < 0.02, "{} vs {}", mc.p_value, exact.p_value);
    }
}
