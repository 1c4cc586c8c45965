use serde::{Deserialize, Serialize};

use super::{AnalysisError, Real};

/// Groups by columns of counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    rows: Vec<String>,
    cols: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(
        rows: Vec<String>,
        cols: Vec<String>,
        counts: Vec<Vec<u64>>,
    ) -> Result<ContingencyTable, AnalysisError> {
        if counts.len() != rows.len() || counts.iter().any(|r| r.len() != cols.len()) {
            return Err(AnalysisError::Shape(format!(
                "{} row labels and {} column labels do not fit the counts",
                rows.len(),
                cols.len()
            )));
        }
        Ok(ContingencyTable { rows, cols, counts })
    }

    /// Convenience constructor with labels `r0.. / c0..`.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<ContingencyTable, AnalysisError> {
        let r = counts.len();
        let c = counts.first().map_or(0, Vec::len);
        ContingencyTable::new((0..r).map(|i| format!("r{i}")).collect(), (0..c).map(|j| format!("c{j}")).collect(), counts)
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row][col]
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.rows.iter().position(|r| r == label)
    }

    pub fn col_index(&self, label: &str) -> Option<usize> {
        self.cols.iter().position(|c| c == label)
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.n_cols()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// rowTotal * colTotal / N per cell. Zero everywhere for an empty table.
    pub fn expected<T: Real>(&self) -> Vec<Vec<T>> {
        let n = self.total();
        let rt = self.row_totals();
        let ct = self.col_totals();
        rt.iter()
            .map(|&r| {
                ct.iter()
                    .map(|&c| {
                        if n == 0 {
                            T::zero()
                        } else {
                            T::from_u64(r).unwrap() * T::from_u64(c).unwrap() / T::from_u64(n).unwrap()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Checks the preconditions shared by the association tests.
    pub fn check_testable(&self) -> Result<(), AnalysisError> {
        if self.n_rows() < 2 || self.n_cols() < 2 {
            return Err(AnalysisError::Shape(format!("need at least 2x2, got {}x{}", self.n_rows(), self.n_cols())));
        }
        if self.total() == 0 {
            return Err(AnalysisError::Empty);
        }
        if let Some(i) = self.row_totals().iter().position(|&t| t == 0) {
            return Err(AnalysisError::ZeroMarginal(format!("row {}", self.rows[i])));
        }
        if let Some(j) = self.col_totals().iter().position(|&t| t == 0) {
            return Err(AnalysisError::ZeroMarginal(format!("column {}", self.cols[j])));
        }
        Ok(())
    }

    /// Tab-separated rendering with totals and expected counts.
    pub fn to_tsv(&self) -> String {
        let exp = self.expected::<f64>();
        let mut out = format!("group\tkind\t{}\ttotal\n", self.cols.join("\t"));
        for (i, row) in self.rows.iter().enumerate() {
            let counts: Vec<String> = self.counts[i].iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("{row}\tcount\t{}\t{}\n", counts.join("\t"), self.row_totals()[i]));
            let e: Vec<String> = exp[i].iter().map(|x| format!("{x:.2}")).collect();
            out.push_str(&format!("{row}\texpected\t{}\t{}\n", e.join("\t"), self.row_totals()[i]));
        }
        let totals: Vec<String> = self.col_totals().iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("total\tcount\t{}\t{}\n", totals.join("\t"), self.total()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_counts_follow_margins() {
        let t = ContingencyTable::from_counts(vec![vec![69, 358, 38], vec![103, 369, 74]]).unwrap();
        let e = t.expected::<f64>();
        assert!((e[0][0] - 465.0 * 172.0 / 1011.0).abs() < 1e-12);
        assert_eq!(t.row_totals(), vec![465, 546]);
        assert_eq!(t.col_totals(), vec![172, 727, 112]);
    }

    #[test]
    fn shape_errors() {
        assert!(ContingencyTable::new(vec!["a".into()], vec!["x".into()], vec![vec![1, 2]]).is_err());
        let t = ContingencyTable::from_counts(vec![vec![1, 0], vec![2, 0]]).unwrap();
        assert!(matches!(t.check_testable(), Err(AnalysisError::ZeroMarginal(_))));
    }
}
