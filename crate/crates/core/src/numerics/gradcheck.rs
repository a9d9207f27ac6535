//! Central finite-difference gradient checking.

use super::dense::DenseMatrix;
use super::real::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(row, col)` of the worst coordinate.
    pub worst_coordinate: (usize, usize),
    pub passed: bool,
}

/// Compares an analytic gradient to central differences, one coordinate at a
/// time.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub eps: f64,
    pub tolerance: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            tolerance: 1e-4,
        }
    }
}

impl GradCheck {
    pub fn new(eps: f64, tolerance: f64) -> Self {
        Self { eps, tolerance }
    }

    /// Relative error per coordinate is
    /// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    ///
    /// The step actually taken is `x+ - x-` after rounding to `T`, so the
    /// quotient stays consistent for `f32` points too.
    pub fn run<T: Real, F>(
        &self,
        mut forward: F,
        analytic: &DenseMatrix<T>,
        point: &DenseMatrix<T>,
    ) -> Result<GradCheckReport>
    where
        F: FnMut(&DenseMatrix<T>) -> f64,
    {
        if self.eps <= 0.0 {
            return Err(Error::Parameter(format!("eps must be positive, got {}", self.eps)));
        }
        if analytic.shape() != point.shape() {
            return Err(Error::Shape(format!(
                "gradient is {:?} but point is {:?}",
                analytic.shape(),
                point.shape()
            )));
        }
        let mut x = point.clone();
        let mut worst = (0.0f64, (0, 0));
        for r in 0..point.rows() {
            for c in 0..point.cols() {
                let orig = point.get(r, c);
                let hi = T::of_f64(orig.as_f64() + self.eps);
                let lo = T::of_f64(orig.as_f64() - self.eps);
                x.set(r, c, hi);
                let f_hi = forward(&x);
                x.set(r, c, lo);
                let f_lo = forward(&x);
                x.set(r, c, orig);
                if !f_hi.is_finite() || !f_lo.is_finite() {
                    return Err(Error::Numerical(format!(
                        "forward is not finite near coordinate ({r}, {c})"
                    )));
                }
                let numeric = (f_hi - f_lo) / (hi.as_f64() - lo.as_f64());
                let a = analytic.get(r, c).as_f64();
                let denom = a.abs().max(numeric.abs()).max(1e-8);
                let rel = (a - numeric).abs() / denom;
                if rel > worst.0 {
                    worst = (rel, (r, c));
                }
            }
        }
        Ok(GradCheckReport {
            max_rel_error: worst.0,
            worst_coordinate: worst.1,
            passed: worst.0 < self.tolerance,
        })
    }
}

/// [`GradCheck::run`] with the given step and the default 1e-4 tolerance.
pub fn finite_diff_check<T: Real, F>(
    forward: F,
    analytic: &DenseMatrix<T>,
    point: &DenseMatrix<T>,
    eps: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&DenseMatrix<T>) -> f64,
{
    GradCheck {
        eps,
        ..GradCheck::default()
    }
    .run(forward, analytic, point)
}
