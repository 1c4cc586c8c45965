use super::{AnalysisError, Real};

/// Fleiss' kappa over an items x categories matrix of rater counts. Every
/// item must be rated by the same number of raters (at least two).
///
/// When every rating falls in a single category the chance agreement is 1
/// and the ratio is undefined; that case is reported as perfect agreement.
pub fn fleiss_kappa<T: Real>(ratings: &[Vec<u32>]) -> Result<T, AnalysisError> {
    let first = ratings.first().ok_or(AnalysisError::Empty)?;
    let k = first.len();
    let n: u32 = first.iter().sum();
    if n < 2 {
        return Err(AnalysisError::InconsistentRaters { item: 0, expected: 2, found: n });
    }
    for (i, row) in ratings.iter().enumerate() {
        if row.len() != k {
            return Err(AnalysisError::Shape(format!("item {i} has {} categories, expected {k}", row.len())));
        }
        let s: u32 = row.iter().sum();
        if s != n {
            return Err(AnalysisError::InconsistentRaters { item: i, expected: n, found: s });
        }
    }
    let t = |x: u64| T::from_u64(x).unwrap();
    let items = t(ratings.len() as u64);
    let nn = t(n as u64);
    let mut p_bar = T::zero();
    for row in ratings {
        let sq: u64 = row.iter().map(|&x| (x as u64) * (x as u64)).sum();
        p_bar = p_bar + (t(sq) - nn) / (nn * (nn - T::one()));
    }
    p_bar = p_bar / items;
    let mut p_e = T::zero();
    for j in 0..k {
        let col: u64 = ratings.iter().map(|r| r[j] as u64).sum();
        let pj = t(col) / (items * nn);
        p_e = p_e + pj * pj;
    }
    if p_e >= T::one() {
        return Ok(T::one());
    }
    Ok((p_bar - p_e) / (T::one() - p_e))
}

/// Builds the count matrix from per-rater category assignments:
/// `assignments[item][rater]` is a category index below `categories`.
pub fn rating_matrix(assignments: &[Vec<usize>], categories: usize) -> Result<Vec<Vec<u32>>, AnalysisError> {
    assignments
        .iter()
        .enumerate()
        .map(|(i, raters)| {
            let mut row = vec![0u32; categories];
            for &c in raters {
                if c >= categories {
                    return Err(AnalysisError::Shape(format!("item {i}: category {c} out of range")));
                }
                row[c] += 1;
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_agreement_is_one() {
        let m = vec![vec![3, 0, 0], vec![0, 3, 0], vec![0, 0, 3], vec![3, 0, 0]];
        assert_eq!(fleiss_kappa::<f64>(&m).unwrap(), 1.0);
        assert_eq!(fleiss_kappa::<f64>(&[vec![4, 0], vec![4, 0]]).unwrap(), 1.0);
    }

    #[test]
    fn rater_count_must_match() {
        let m = vec![vec![3, 0], vec![1, 1]];
        assert!(matches!(
            fleiss_kappa::<f64>(&m),
            Err(AnalysisError::InconsistentRaters { item: 1, expected: 3, found: 2 })
        ));
    }

    #[test]
    fn chance_level_is_near_zero() {
        // Half the items unanimous, half split: observed agreement equals chance.
        let m = vec![vec![2, 0], vec![0, 2], vec![1, 1], vec![1, 1]];
        let k: f64 = fleiss_kappa(&m).unwrap();
        assert!(k.abs() < 1e-12, "{k}");
    }

    proptest! {
        #[test]
        fn invariant_under_category_relabeling(
            rows in proptest::collection::vec(proptest::collection::vec(0u32..4, 3), 2..12),
            perm_seed in 0usize..6,
        ) {
            // Force a constant rater count by topping up the last category.
            let n = 6u32;
            let m: Vec<Vec<u32>> = rows
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    let s: u32 = r.iter().sum();
                    if s > n { r = vec![n, 0, 0]; } else { r[2] += n - s; }
                    r
                })
                .collect();
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let p = perms[perm_seed];
            let relabeled: Vec<Vec<u32>> = m.iter().map(|r| vec![r[p[0]], r[p[1]], r[p[2]]]).collect();
            let a: f64 = fleiss_kappa(&m).unwrap();
            let b: f64 = fleiss_kappa(&relabeled).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            let unanimous = m.iter().all(|r| r.iter().filter(|&&x| x > 0).count() == 1);
            prop_assert_eq!(unanimous, (a - 1.0).abs() < 1e-12);
        }
    }
}
