use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use super::real::Real;
use crate::error::{Error, Result};

/// Elementwise nonlinearity applied to HGE attention scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Activation {
    Relu,
    LeakyRelu { alpha: f32 },
}

impl Default for Activation {
    fn default() -> Self {
        Activation::Relu
    }
}

impl Activation {
    pub fn leaky(alpha: f32) -> Result<Self> {
        check_alpha(alpha as f64)?;
        Ok(Activation::LeakyRelu { alpha })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::Relu => Ok(()),
            Activation::LeakyRelu { alpha } => check_alpha(alpha as f64),
        }
    }

    #[inline]
    pub fn apply<T: Real>(&self, x: T) -> T {
        match *self {
            Activation::Relu => x.max(T::zero()),
            Activation::LeakyRelu { alpha } => {
                let a = T::of_f64(alpha as f64);
                (a * x).max(x)
            }
        }
    }

    /// Derivative at `x`; the kink at zero takes the left-hand slope.
    #[inline]
    pub fn derivative<T: Real>(&self, x: T) -> T {
        match *self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu { alpha } => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::of_f64(alpha as f64)
                }
            }
        }
    }

    /// Whether entries this activation maps to zero drop out of the softmax.
    ///
    /// Only ReLU gates: leaky ReLU never outputs an exact zero off the origin.
    pub fn gates(&self) -> bool {
        matches!(self, Activation::Relu)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "leaky relu alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Elementwise `max(0, x)`.
pub fn relu<T: Real>(a: &DenseMatrix<T>) -> DenseMatrix<T> {
    a.map(|x| x.max(T::zero()))
}

/// Elementwise `max(alpha * x, x)` for `0 < alpha < 1`.
pub fn leaky_relu<T: Real>(a: &DenseMatrix<T>, alpha: f64) -> Result<DenseMatrix<T>> {
    check_alpha(alpha)?;
    let alpha = T::of_f64(alpha);
    Ok(a.map(|x| (alpha * x).max(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix<f64> {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn relu_definition() {
        assert_eq!(relu(&m(&[&[-1.0, 0.0, 2.0]])), m(&[&[0.0, 0.0, 2.0]]));
        assert_eq!(relu(&m(&[&[-1.0, -3.0]])), m(&[&[0.0, 0.0]]));
        let pos = m(&[&[1.0, 3.0], &[0.5, 9.0]]);
        assert_eq!(relu(&pos), pos);
    }

    #[test]
    fn leaky_definition() {
        assert_eq!(leaky_relu(&m(&[&[-10.0, 5.0]]), 0.1).unwrap(), m(&[&[-1.0, 5.0]]));
        assert_eq!(leaky_relu(&m(&[&[-2.0]]), 0.5).unwrap(), m(&[&[-1.0]]));
        let pos = m(&[&[0.0, 7.0]]);
        assert_eq!(leaky_relu(&pos, 0.3).unwrap(), pos);
    }

    #[test]
    fn leaky_alpha_bounds() {
        let x = m(&[&[1.0]]);
        assert!(matches!(leaky_relu(&x, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(leaky_relu(&x, 1.0), Err(Error::Parameter(_))));
        assert!(Activation::leaky(1.5).is_err());
    }

    proptest! {
        #[test]
        fn relu_idempotent(v in proptest::collection::vec(-1e3f64..1e3, 1..20)) {
            let x = DenseMatrix::new(1, v.len(), v).unwrap();
            prop_assert_eq!(relu(&relu(&x)), relu(&x));
        }

        #[test]
        fn leaky_limit_is_relu(v in proptest::collection::vec(-1e3f64..1e3, 1..20)) {
            let x = DenseMatrix::new(1, v.len(), v).unwrap();
            let a = leaky_relu(&x, 1e-12).unwrap();
            let b = relu(&x);
            for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }
    }
}
