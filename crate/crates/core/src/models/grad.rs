use crate::numerics::{axpy, DenseMatrix, Real};

/// Gradient for one parameter matrix, with the rows the batch touched.
#[derive(Debug, Clone)]
pub struct GradBlock<T: Real = f32> {
    pub grad: DenseMatrix<T>,
    touched: Vec<usize>,
    mark: Vec<bool>,
}

impl<T: Real> GradBlock<T> {
    pub fn zeros_like(m: &DenseMatrix<T>) -> Self {
        Self {
            grad: DenseMatrix::zeros(m.rows(), m.cols()),
            touched: Vec::new(),
            mark: vec![false; m.rows()],
        }
    }

    #[inline]
    pub fn touch(&mut self, row: usize) {
        if !self.mark[row] {
            self.mark[row] = true;
            self.touched.push(row);
        }
    }

    /// `grad[row] += alpha * x`
    #[inline]
    pub fn add_row(&mut self, row: usize, alpha: T, x: &[T]) {
        self.touch(row);
        axpy(alpha, x, self.grad.row_mut(row));
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [T] {
        self.touch(row);
        self.grad.row_mut(row)
    }

    /// Marks every row holding a nonzero entry.
    pub fn touch_nonzero_rows(&mut self) {
        for r in 0..self.grad.rows() {
            if !self.mark[r] && self.grad.row(r).iter().any(|x| *x != T::zero()) {
                self.touch(r);
            }
        }
    }

    /// Touched rows in ascending order.
    pub fn touched(&mut self) -> &[usize] {
        self.touched.sort_unstable();
        &self.touched
    }

    /// Touched rows in ascending order, alongside the gradient.
    pub fn rows_and_grad(&mut self) -> (&[usize], &DenseMatrix<T>) {
        self.touched.sort_unstable();
        (&self.touched, &self.grad)
    }

    /// Zeroes the touched rows and forgets them.
    pub fn clear(&mut self) {
        for &r in &self.touched {
            self.grad.row_mut(r).iter_mut().for_each(|x| *x = T::zero());
            self.mark[r] = false;
        }
        self.touched.clear();
    }
}

/// A model trained by gradient descent on pair scores.
///
/// Parameters are exposed as an ordered list of matrices; gradients come back
/// in the same order.
pub trait GradientModel<T: Real> {
    type Cache;

    fn blocks(&self) -> Vec<&DenseMatrix<T>>;
    fn blocks_mut(&mut self) -> Vec<&mut DenseMatrix<T>>;

    /// Scores of `pairs` plus whatever the backward pass needs.
    fn forward_batch(&self, pairs: &[(u32, u32)]) -> (Vec<T>, Self::Cache);

    /// Accumulates `sum_k dscores[k] * d score_k / d params` into `grads`.
    fn backward_batch(
        &self,
        cache: &Self::Cache,
        pairs: &[(u32, u32)],
        dscores: &[T],
        grads: &mut [GradBlock<T>],
    );

    fn new_grads(&self) -> Vec<GradBlock<T>> {
        self.blocks().into_iter().map(GradBlock::zeros_like).collect()
    }

    /// Number of learnable scalars, by enumeration.
    fn enumerate_params(&self) -> usize {
        self.blocks().iter().map(|b| b.as_slice().len()).sum()
    }
}
