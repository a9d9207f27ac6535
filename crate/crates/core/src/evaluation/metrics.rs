//! Top-k hit rate and precision.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

fn check(recs: &[Vec<usize>], truth: &[BTreeSet<usize>]) -> Result<()> {
    if recs.is_empty() {
        return Err(Error::Evaluation("no users to evaluate".into()));
    }
    if recs.len() != truth.len() {
        return Err(Error::Evaluation(format!(
            "{} recommendation lists for {} truth sets",
            recs.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Fraction of users with at least one relevant item among their first `k`
/// recommendations.
pub fn hit_rate_at_k(recs: &[Vec<usize>], truth: &[BTreeSet<usize>], k: usize) -> Result<f64> {
    check(recs, truth)?;
    let hits = recs
        .iter()
        .zip(truth)
        .filter(|(r, t)| r.iter().take(k).any(|i| t.contains(i)))
        .count();
    Ok(hits as f64 / recs.len() as f64)
}

/// Mean over users of `|top-k ∩ truth| / |top-k|`; an empty list counts 0.
pub fn precision_at_k(recs: &[Vec<usize>], truth: &[BTreeSet<usize>], k: usize) -> Result<f64> {
    check(recs, truth)?;
    let total: f64 = recs
        .iter()
        .zip(truth)
        .map(|(r, t)| {
            let top = &r[..k.min(r.len())];
            if top.is_empty() {
                0.0
            } else {
                top.iter().filter(|i| t.contains(i)).count() as f64 / top.len() as f64
            }
        })
        .sum();
    Ok(total / recs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn hand_cases() {
        assert_eq!(hit_rate_at_k(&[vec![3, 1]], &[set(&[1])], 2).unwrap(), 1.0);
        assert_eq!(
            hit_rate_at_k(&[vec![0], vec![1]], &[set(&[0]), set(&[2])], 1).unwrap(),
            0.5
        );
        assert_eq!(precision_at_k(&[vec![0, 2]], &[set(&[0, 1])], 2).unwrap(), 0.5);
        assert_eq!(precision_at_k(&[vec![0, 1]], &[set(&[0, 1, 5])], 2).unwrap(), 1.0);
        assert!(hit_rate_at_k(&[], &[], 1).is_err());
    }

    proptest! {
        #[test]
        fn hit_rate_monotone_in_k(
            recs in proptest::collection::vec(proptest::collection::vec(0usize..10, 10), 1..6),
            truth in proptest::collection::vec(proptest::collection::btree_set(0usize..10, 1..4), 6),
        ) {
            let truth = &truth[..recs.len()];
            let mut prev = 0.0;
            for k in 1..=10 {
                let hr = hit_rate_at_k(&recs, truth, k).unwrap();
                prop_assert!(hr >= prev && (0.0..=1.0).contains(&hr));
                prev = hr;
            }
        }

        #[test]
        fn single_relevant_k1_precision_equals_hit_rate(
            recs in proptest::collection::vec(proptest::collection::vec(0usize..10, 3), 1..6),
            truth in proptest::collection::vec(0usize..10, 6),
        ) {
            let truth: Vec<_> = truth[..recs.len()].iter().map(|&t| set(&[t])).collect();
            prop_assert_eq!(hit_rate_at_k(&recs, &truth, 1).unwrap(), precision_at_k(&recs, &truth, 1).unwrap());
        }
    }
}
