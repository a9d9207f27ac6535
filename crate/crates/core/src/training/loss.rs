//! Training losses on pair scores.

use serde::{Deserialize, Serialize};

use crate::numerics::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Binary cross-entropy over positives and sampled negatives.
    #[default]
    Bce,
    /// Pairwise `-ln sigma(s_pos - s_neg)` over each positive's negatives.
    Bpr,
}

/// `ln(1 + exp(x))` without overflow.
#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Mean of `ln(1 + exp(-(2y - 1) z))` and its gradient `(sigma(z) - y) / n`.
pub fn bce_with_logits<T: Real>(logits: &[T], labels: &[T]) -> (T, Vec<T>) {
    assert_eq!(logits.len(), labels.len(), "logits and labels differ in length");
    let n = T::of_f64(logits.len().max(1) as f64);
    let mut total = T::zero();
    let grads = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            // max(z, 0) - z y + ln(1 + exp(-|z|))
            total = total + z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p();
            (sigmoid(z) - y) / n
        })
        .collect();
    (total / n, grads)
}

/// Mean over `(positive, negative)` pairs of `softplus(s_neg - s_pos)`.
/// `pairs[k] = (p, q)` indexes `pos` and `neg`. Returns the loss and the
/// gradients w.r.t. `pos` and `neg`.
pub fn bpr<T: Real>(pos: &[T], neg: &[T], pairs: &[(usize, usize)]) -> (T, Vec<T>, Vec<T>) {
    let n = T::of_f64(pairs.len().max(1) as f64);
    let mut dpos = vec![T::zero(); pos.len()];
    let mut dneg = vec![T::zero(); neg.len()];
    let mut total = T::zero();
    for &(p, q) in pairs {
        let x = neg[q] - pos[p];
        total = total + softplus(x);
        let g = sigmoid(x) / n;
        dpos[p] = dpos[p] - g;
        dneg[q] = dneg[q] + g;
    }
    (total / n, dpos, dneg)
}
