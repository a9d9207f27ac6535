use std::cmp::Ordering;

use crate::numerics::Real;

/// Result of a top-k query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopK {
    pub items: Vec<usize>,
    /// Fewer than `k` eligible candidates existed.
    pub short: bool,
}

/// Highest-scoring `k` of `scored`, ties broken by ascending item index.
pub fn top_k_by_score<T: Real>(mut scored: Vec<(usize, T)>, k: usize) -> TopK {
    let short = scored.len() < k;
    let cmp = |a: &(usize, T), b: &(usize, T)| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
    };
    if k == 0 {
        return TopK { items: Vec::new(), short };
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    TopK {
        items: scored.into_iter().map(|(i, _)| i).collect(),
        short,
    }
}

/// Anything that scores user-item pairs.
pub trait Scorer {
    fn score(&self, user: usize, item: usize) -> f32;
}

/// Top `k` of `candidates` for `user`, skipping items for which `exclude`
/// holds.
pub fn recommend_topk<S: Scorer + ?Sized>(
    model: &S,
    user: usize,
    k: usize,
    candidates: &[usize],
    exclude: impl Fn(usize) -> bool,
) -> TopK {
    let scored = candidates
        .iter()
        .copied()
        .filter(|&i| !exclude(i))
        .map(|i| (i, model.score(user, i)))
        .collect();
    top_k_by_score(scored, k)
}
