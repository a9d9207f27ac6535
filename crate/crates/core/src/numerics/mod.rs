//! Dense and sparse primitives, activations, the gated softmax, and the
//! finite-difference checker used to verify every backward pass.

mod activation;
mod dense;
mod gradcheck;
mod incidence;
mod real;
mod softmax;

pub use activation::{leaky_relu, relu, Activation};
pub use dense::{matmul, DenseMatrix};
pub use gradcheck::{finite_diff_check, GradCheck, GradCheckReport};
pub use incidence::SparseIncidence;
pub use real::{axpy, dot, Real};
pub use softmax::{gated_row_softmax, softmax_into};
