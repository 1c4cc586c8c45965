use serde::{Deserialize, Serialize};

use super::contingency::ContingencyTable;
use super::special::{chi_square_sf, normal_two_sided};
use super::{AnalysisError, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult<T> {
    pub statistic: T,
    pub df: u32,
    pub p_value: T,
    pub n: u64,
    /// Cells whose expected count is below 5.
    pub low_expected_cells: usize,
}

impl<T> TestResult<T> {
    pub fn assumption_violated(&self) -> bool {
        self.low_expected_cells > 0
    }
}

/// Pearson's chi-square test of independence.
pub fn chi_square_independence<T: Real>(table: &ContingencyTable) -> Result<TestResult<T>, AnalysisError> {
    table.check_testable()?;
    let exp = table.expected::<T>();
    let five = T::from_f64(5.0).unwrap();
    let mut stat = T::zero();
    let mut low = 0;
    for (i, row) in table.counts().iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = exp[i][j];
            let d = T::from_u64(o).unwrap() - e;
            stat = stat + d * d / e;
            if e < five {
                low += 1;
            }
        }
    }
    let df = ((table.n_rows() - 1) * (table.n_cols() - 1)) as u32;
    Ok(TestResult { statistic: stat, df, p_value: chi_square_sf(stat, df), n: table.total(), low_expected_cells: low })
}

/// sqrt(chi2 / (N (min(r, c) - 1))).
pub fn cramers_v<T: Real>(chi2: T, n: u64, rows: usize, cols: usize) -> T {
    let k = rows.min(cols);
    if n == 0 || k < 2 {
        return T::nan();
    }
    (chi2 / (T::from_u64(n).unwrap() * T::from_usize(k - 1).unwrap())).sqrt()
}

/// How many simultaneous tests the Bonferroni correction divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonferroniDivisor {
    /// One test per column (the comparisons made within each group row).
    #[default]
    Columns,
    /// One test per cell.
    Cells,
}

impl BonferroniDivisor {
    pub fn tests(self, table: &ContingencyTable) -> usize {
        match self {
            BonferroniDivisor::Columns => table.n_cols(),
            BonferroniDivisor::Cells => table.n_rows() * table.n_cols(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Significance {
    None,
    /// Significant at .05 after correction.
    P05,
    /// Significant at .01 after correction.
    P01,
}

impl Significance {
    pub fn stars(self) -> &'static str {
        match self {
            Significance::None => "",
            Significance::P05 => "*",
            Significance::P01 => "**",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellTest<T> {
    pub residual: T,
    pub p_value: T,
    /// p times the number of tests, capped at 1.
    pub adjusted_p: T,
    pub flag: Significance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosthocTable<T> {
    pub tests: usize,
    pub cells: Vec<Vec<CellTest<T>>>,
}

impl<T: Copy> PosthocTable<T> {
    pub fn flags(&self) -> Vec<Vec<Significance>> {
        self.cells.iter().map(|r| r.iter().map(|c| c.flag).collect()).collect()
    }
}

/// Adjusted standardized residuals with a Bonferroni-corrected two-sided
/// normal test per cell.
pub fn posthoc_bonferroni<T: Real>(
    table: &ContingencyTable,
    divisor: BonferroniDivisor,
) -> Result<PosthocTable<T>, AnalysisError> {
    table.check_testable()?;
    let n = T::from_u64(table.total()).unwrap();
    let rt = table.row_totals();
    let ct = table.col_totals();
    let exp = table.expected::<T>();
    let tests = divisor.tests(table);
    let m = T::from_usize(tests).unwrap();
    let (a05, a01) = (T::from_f64(0.05).unwrap(), T::from_f64(0.01).unwrap());
    let cells = table
        .counts()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &o)| {
                    let e = exp[i][j];
                    let ri = T::from_u64(rt[i]).unwrap() / n;
                    let cj = T::from_u64(ct[j]).unwrap() / n;
                    let denom = (e * (T::one() - ri) * (T::one() - cj)).sqrt();
                    let residual =
                        if denom > T::zero() { (T::from_u64(o).unwrap() - e) / denom } else { T::zero() };
                    let p_value = normal_two_sided(residual);
                    let adjusted_p = (p_value * m).min(T::one());
                    let flag = if adjusted_p < a01 {
                        Significance::P01
                    } else if adjusted_p < a05 {
                        Significance::P05
                    } else {
                        Significance::None
                    };
                    CellTest { residual, p_value, adjusted_p, flag }
                })
                .collect()
        })
        .collect();
    Ok(PosthocTable { tests, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_rows_are_independent() {
        let t = ContingencyTable::from_counts(vec![vec![10, 20, 30], vec![10, 20, 30]]).unwrap();
        let r = chi_square_independence::<f64>(&t).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(cramers_v(r.statistic, r.n, 2, 3), 0.0);
        let post = posthoc_bonferroni::<f64>(&t, BonferroniDivisor::Cells).unwrap();
        assert!(post.flags().iter().flatten().all(|&f| f == Significance::None));
    }

    #[test]
    fn small_expected_counts_are_flagged() {
        let t = ContingencyTable::from_counts(vec![vec![3, 46, 2], vec![1, 49, 2]]).unwrap();
        let r = chi_square_independence::<f64>(&t).unwrap();
        assert_eq!(r.df, 2);
        assert!(r.assumption_violated());
    }

    #[test]
    fn cramers_v_degenerate_inputs() {
        assert!(cramers_v(1.0f64, 0, 2, 2).is_nan());
        assert!(cramers_v(1.0f64, 10, 1, 3).is_nan());
    }
}
