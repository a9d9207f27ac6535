//! Row softmax restricted to a support set, with optional zero gating.
//!
//! Plain softmax gives `exp(0) = 1` to an entry that ReLU clamped to zero, so
//! it can never switch an item off. The gated form drops such entries from the
//! normalisation entirely: they receive weight exactly zero and the remaining
//! active entries renormalise among themselves. A row with no active entry is
//! all zeros.

use super::dense::DenseMatrix;
use super::real::Real;
use crate::error::{Error, Result};

/// Softmax of `values` into `out`.
///
/// With `gated`, entries `<= 0` are excluded and written as zero. Returns the
/// number of active entries; when that is zero, `out` is all zeros.
pub fn softmax_into<T: Real>(values: &[T], gated: bool, out: &mut [T]) -> usize {
    debug_assert_eq!(values.len(), out.len());
    let active = |v: T| !gated || v > T::zero();
    let mut max = T::neg_infinity();
    let mut n_active = 0;
    for &v in values {
        if active(v) {
            n_active += 1;
            if v > max {
                max = v;
            }
        }
    }
    if n_active == 0 {
        out.iter_mut().for_each(|o| *o = T::zero());
        return 0;
    }
    let mut total = T::zero();
    for (o, &v) in out.iter_mut().zip(values) {
        *o = if active(v) { (v - max).exp() } else { T::zero() };
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
    n_active
}

/// Row-wise gated softmax over `support[row]`.
///
/// For each row the active set is `{j in support[row] : scores[row, j] > 0}`;
/// active entries get `exp(s_j - max) / sum`, everything else is zero.
pub fn gated_row_softmax<T: Real>(
    scores: &DenseMatrix<T>,
    support: &[Vec<usize>],
) -> Result<DenseMatrix<T>> {
    if support.len() != scores.rows() {
        return Err(Error::Shape(format!(
            "{} support sets for {} score rows",
            support.len(),
            scores.rows()
        )));
    }
    let mut out = DenseMatrix::zeros(scores.rows(), scores.cols());
    let mut vals = Vec::new();
    let mut weights = Vec::new();
    for (r, cols) in support.iter().enumerate() {
        if let Some(&bad) = cols.iter().find(|&&c| c >= scores.cols()) {
            return Err(Error::Shape(format!(
                "support column {bad} out of range for {} columns",
                scores.cols()
            )));
        }
        vals.clear();
        vals.extend(cols.iter().map(|&c| scores.get(r, c)));
        weights.resize(vals.len(), T::zero());
        softmax_into(&vals, true, &mut weights);
        for (&c, &w) in cols.iter().zip(&weights) {
            out.set(r, c, w);
        }
    }
    Ok(out)
}
