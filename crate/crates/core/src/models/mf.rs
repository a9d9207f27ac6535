use rand::Rng;

use super::grad::{GradBlock, GradientModel};
use crate::error::{Error, Result};
use crate::numerics::{dot, DenseMatrix, Real};

/// Canonical matrix factorisation: `score(u, i) = <user_u, item_i>`.
#[derive(Debug, Clone, PartialEq)]
pub struct MfModel<T: Real = f32> {
    pub user_embeddings: DenseMatrix<T>,
    pub item_embeddings: DenseMatrix<T>,
}

impl<T: Real> MfModel<T> {
    pub fn new(user_embeddings: DenseMatrix<T>, item_embeddings: DenseMatrix<T>) -> Result<Self> {
        if user_embeddings.cols() != item_embeddings.cols() || user_embeddings.cols() == 0 {
            return Err(Error::Shape(format!(
                "user dim {} and item dim {} must match and be >= 1",
                user_embeddings.cols(),
                item_embeddings.cols()
            )));
        }
        Ok(Self {
            user_embeddings,
            item_embeddings,
        })
    }

    /// Embeddings uniform in `[-0.01, 0.01]`.
    pub fn random<R: Rng + ?Sized>(n_users: usize, n_items: usize, d: usize, rng: &mut R) -> Self {
        Self::random_scaled(n_users, n_items, d, 0.01, rng)
    }

    pub fn random_scaled<R: Rng + ?Sized>(
        n_users: usize,
        n_items: usize,
        d: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let user_embeddings = DenseMatrix::uniform(n_users, d, -scale, scale, rng);
        let item_embeddings = DenseMatrix::uniform(n_items, d, -scale, scale, rng);
        Self {
            user_embeddings,
            item_embeddings,
        }
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

    pub fn score(&self, user: usize, item: usize) -> Result<T> {
        mf_score(self, user, item)
    }

    pub fn param_count(&self) -> usize {
        (self.n_users() + self.n_items()) * self.dim()
    }
}

/// Dot product of a user row and an item row.
pub fn mf_score<T: Real>(m: &MfModel<T>, user: usize, item: usize) -> Result<T> {
    if user >= m.n_users() || item >= m.n_items() {
        return Err(Error::Parameter(format!(
            "pair ({user}, {item}) out of range for {} users and {} items",
            m.n_users(),
            m.n_items()
        )));
    }
    Ok(dot(m.user_embeddings.row(user), m.item_embeddings.row(item)))
}

impl<T: Real> GradientModel<T> for MfModel<T> {
    type Cache = ();

    fn blocks(&self) -> Vec<&DenseMatrix<T>> {
        vec![&self.user_embeddings, &self.item_embeddings]
    }

    fn blocks_mut(&mut self) -> Vec<&mut DenseMatrix<T>> {
        vec![&mut self.user_embeddings, &mut self.item_embeddings]
    }

    fn forward_batch(&self, pairs: &[(u32, u32)]) -> (Vec<T>, ()) {
        let scores = pairs
            .iter()
            .map(|&(u, i)| {
                dot(
                    self.user_embeddings.row(u as usize),
                    self.item_embeddings.row(i as usize),
                )
            })
            .collect();
        (scores, ())
    }

    fn backward_batch(&self, _: &(), pairs: &[(u32, u32)], dscores: &[T], grads: &mut [GradBlock<T>]) {
        let (gu, gi) = grads.split_at_mut(1);
        for (&(u, i), &ds) in pairs.iter().zip(dscores) {
            let (u, i) = (u as usize, i as usize);
            gu[0].add_row(u, ds, self.item_embeddings.row(i));
            gi[0].add_row(i, ds, self.user_embeddings.row(u));
        }
    }
}
