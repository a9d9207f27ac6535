//! Matrix factorisation with item-side category features and biases.
//!
//! `score(u, i) = <x_u, y_i + sum_{f in F(i)} theta_f> + b_u + b_i`, where
//! `F(i)` holds one category feature per hierarchy level. The user-side
//! feature term is absent: no user features exist.

use rand::Rng;

use super::grad::{GradBlock, GradientModel};
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, DenseMatrix, Real, SparseIncidence};

#[derive(Debug, Clone, PartialEq)]
pub struct HybridMfModel<T: Real = f32> {
    pub user_embeddings: DenseMatrix<T>,
    pub item_embeddings: DenseMatrix<T>,
    /// `F x d`, one row per category of every level.
    pub feature_embeddings: DenseMatrix<T>,
    /// `|U| x 1`.
    pub user_bias: DenseMatrix<T>,
    /// `I x 1`.
    pub item_bias: DenseMatrix<T>,
    /// Active feature indices of every item, one per level.
    pub item_features: Vec<Vec<usize>>,
}

/// Features from per-level incidences: level `l`'s categories occupy the
/// index range starting after all categories of the finer levels.
pub fn item_features(levels: &[SparseIncidence]) -> (Vec<Vec<usize>>, usize) {
    let n_items = levels.first().map_or(0, SparseIncidence::n_items);
    let mut features = vec![Vec::with_capacity(levels.len()); n_items];
    let mut offset = 0;
    for g in levels {
        for (i, f) in features.iter_mut().enumerate() {
            f.push(offset + g.category_of(i));
        }
        offset += g.n_categories();
    }
    (features, offset)
}

impl<T: Real> HybridMfModel<T> {
    pub fn new(
        user_embeddings: DenseMatrix<T>,
        item_embeddings: DenseMatrix<T>,
        feature_embeddings: DenseMatrix<T>,
        user_bias: DenseMatrix<T>,
        item_bias: DenseMatrix<T>,
        item_features: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let d = user_embeddings.cols();
        let ok = item_embeddings.cols() == d
            && feature_embeddings.cols() == d
            && user_bias.shape() == (user_embeddings.rows(), 1)
            && item_bias.shape() == (item_embeddings.rows(), 1)
            && item_features.len() == item_embeddings.rows();
        if !ok {
            return Err(Error::Shape(format!(
                "hybrid model blocks disagree: users {:?}, items {:?}, features {:?}, \
                 user bias {:?}, item bias {:?}, {} feature lists",
                user_embeddings.shape(),
                item_embeddings.shape(),
                feature_embeddings.shape(),
                user_bias.shape(),
                item_bias.shape(),
                item_features.len()
            )));
        }
        let n_levels = item_features.first().map_or(0, Vec::len);
        for (i, f) in item_features.iter().enumerate() {
            if f.len() != n_levels {
                return Err(Error::Parameter(format!(
                    "item {i} has {} features, expected one per level ({n_levels})",
                    f.len()
                )));
            }
            if let Some(&bad) = f.iter().find(|&&x| x >= feature_embeddings.rows()) {
                return Err(Error::Parameter(format!(
                    "item {i} uses feature {bad} of {}",
                    feature_embeddings.rows()
                )));
            }
        }
        Ok(Self {
            user_embeddings,
            item_embeddings,
            feature_embeddings,
            user_bias,
            item_bias,
            item_features,
        })
    }

    /// Embeddings uniform in `[-0.01, 0.01]`, biases zero.
    pub fn random<R: Rng + ?Sized>(
        n_users: usize,
        d: usize,
        levels: &[SparseIncidence],
        rng: &mut R,
    ) -> Result<Self> {
        let (features, n_features) = item_features(levels);
        let n_items = features.len();
        Self::new(
            DenseMatrix::uniform(n_users, d, -0.01, 0.01, rng),
            DenseMatrix::uniform(n_items, d, -0.01, 0.01, rng),
            DenseMatrix::uniform(n_features, d, -0.01, 0.01, rng),
            DenseMatrix::zeros(n_users, 1),
            DenseMatrix::zeros(n_items, 1),
            features,
        )
    }

    pub fn dim(&self) -> usize {
        self.user_embeddings.cols()
    }

    pub fn n_users(&self) -> usize {
        self.user_embeddings.rows()
    }

    pub fn n_items(&self) -> usize {
        self.item_embeddings.rows()
    }

    pub fn param_count(&self) -> usize {
        (self.n_users() + self.n_items() + self.feature_embeddings.rows()) * self.dim()
            + self.n_users()
            + self.n_items()
    }

    fn item_vector_into(&self, item: usize, out: &mut [T]) {
        out.copy_from_slice(self.item_embeddings.row(item));
        for &f in &self.item_features[item] {
            axpy(T::one(), self.feature_embeddings.row(f), out);
        }
    }

    /// `y_i + sum_f theta_f` for every item.
    pub fn effective_item_embeddings(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.n_items(), self.dim());
        for i in 0..self.n_items() {
            let mut row = vec![T::zero(); self.dim()];
            self.item_vector_into(i, &mut row);
            out.row_mut(i).copy_from_slice(&row);
        }
        out
    }

    pub fn score(&self, user: usize, item: usize) -> Result<T> {
        if user >= self.n_users() || item >= self.n_items() {
            return Err(Error::Parameter(format!(
                "pair ({user}, {item}) out of range for {} users and {} items",
                self.n_users(),
                self.n_items()
            )));
        }
        Ok(self.score_unchecked(user, item))
    }

    fn score_unchecked(&self, user: usize, item: usize) -> T {
        let mut v = vec![T::zero(); self.dim()];
        self.item_vector_into(item, &mut v);
        dot(self.user_embeddings.row(user), &v)
            + self.user_bias.get(user, 0)
            + self.item_bias.get(item, 0)
    }
}

pub fn hybrid_score<T: Real>(m: &HybridMfModel<T>, user: usize, item: usize) -> Result<T> {
    m.score(user, item)
}

impl<T: Real> GradientModel<T> for HybridMfModel<T> {
    type Cache = ();

    /// Users, items, features, user bias, item bias.
    fn blocks(&self) -> Vec<&DenseMatrix<T>> {
        vec![
            &self.user_embeddings,
            &self.item_embeddings,
            &self.feature_embeddings,
            &self.user_bias,
            &self.item_bias,
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut DenseMatrix<T>> {
        vec![
            &mut self.user_embeddings,
            &mut self.item_embeddings,
            &mut self.feature_embeddings,
            &mut self.user_bias,
            &mut self.item_bias,
        ]
    }

    fn forward_batch(&self, pairs: &[(u32, u32)]) -> (Vec<T>, ()) {
        let scores = pairs
            .iter()
            .map(|&(u, i)| self.score_unchecked(u as usize, i as usize))
            .collect();
        (scores, ())
    }

    fn backward_batch(&self, _: &(), pairs: &[(u32, u32)], dscores: &[T], grads: &mut [GradBlock<T>]) {
        let mut v = vec![T::zero(); self.dim()];
        for (&(u, i), &ds) in pairs.iter().zip(dscores) {
            let (u, i) = (u as usize, i as usize);
            self.item_vector_into(i, &mut v);
            let xu = self.user_embeddings.row(u);
            grads[0].add_row(u, ds, &v);
            grads[1].add_row(i, ds, xu);
            for &f in &self.item_features[i] {
                grads[2].add_row(f, ds, xu);
            }
            grads[3].add_row(u, ds, &[T::one()]);
            grads[4].add_row(i, ds, &[T::one()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::mf::MfModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn incidence() -> Vec<SparseIncidence> {
        vec![
            SparseIncidence::from_assignment(vec![0, 0, 1, 2], 3).unwrap(),
            SparseIncidence::from_assignment(vec![0, 0, 0, 1], 2).unwrap(),
        ]
    }

    #[test]
    fn features_have_one_per_level() {
        let (f, n) = item_features(&incidence());
        assert_eq!(n, 5);
        assert_eq!(f, vec![vec![0, 3], vec![0, 3], vec![1, 3], vec![2, 4]]);
    }

    #[test]
    fn zero_features_reduce_to_mf() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut h = HybridMfModel::<f32>::random(3, 4, &incidence(), &mut rng).unwrap();
        h.feature_embeddings = DenseMatrix::zeros(5, 4);
        let mf = MfModel::new(h.user_embeddings.clone(), h.item_embeddings.clone()).unwrap();
        for u in 0..3 {
            for i in 0..4 {
                assert_eq!(h.score(u, i).unwrap(), mf.score(u, i).unwrap());
            }
        }
    }

    #[test]
    fn feature_only_score() {
        let g = vec![SparseIncidence::from_assignment(vec![0], 1).unwrap()];
        let m = HybridMfModel::new(
            DenseMatrix::from_rows(&[&[0.6f64, 0.8]]).unwrap(),
            DenseMatrix::zeros(1, 2),
            DenseMatrix::from_rows(&[&[0.6, 0.8]]).unwrap(),
            DenseMatrix::from_rows(&[&[0.25]]).unwrap(),
            DenseMatrix::from_rows(&[&[0.5]]).unwrap(),
            item_features(&g).0,
        )
        .unwrap();
        assert!((m.score(0, 0).unwrap() - 1.75).abs() < 1e-12);
        assert!(m.score(1, 0).is_err());
    }

    #[test]
    fn param_count_enumerates_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = HybridMfModel::<f32>::random(3, 4, &incidence(), &mut rng).unwrap();
        let n: usize = h.blocks().iter().map(|b| b.as_slice().len()).sum();
        assert_eq!(h.param_count(), n);
    }
}
