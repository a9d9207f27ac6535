//! Row-sparse optimizers: only rows a batch touched are read or written.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::GradBlock;
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f32, beta2: f32, eps: f32 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::adam()
    }
}

impl OptimizerKind {
    pub fn adam() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Adam { beta1, beta2, eps } = *self {
            let ok = (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0;
            if !ok {
                return Err(Error::Config(format!(
                    "adam needs beta1, beta2 in [0, 1) and eps > 0, got ({beta1}, {beta2}, {eps})"
                )));
            }
        }
        Ok(())
    }
}

/// Optimizer state for an ordered list of parameter blocks.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    step: u64,
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, blocks: &[&DenseMatrix]) -> Self {
        let moments = |on: bool| {
            if on {
                blocks
                    .iter()
                    .map(|b| DenseMatrix::zeros(b.rows(), b.cols()))
                    .collect()
            } else {
                Vec::new()
            }
        };
        let adam = matches!(kind, OptimizerKind::Adam { .. });
        Self {
            kind,
            step: 0,
            first: moments(adam),
            second: moments(adam),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to the touched rows of every block. Adam moments of
    /// untouched rows are left as they are (lazy Adam); bias correction uses
    /// the global step count.
    pub fn step(&mut self, params: Vec<&mut DenseMatrix>, grads: &mut [GradBlock], lr: f32) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.into_iter().zip(grads.iter_mut()) {
                    let (rows, grad) = g.rows_and_grad();
                    for &r in rows {
                        for (x, d) in p.row_mut(r).iter_mut().zip(grad.row(r)) {
                            *x -= lr * d;
                        }
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - (beta1 as f64).powi(t);
                let c2 = 1.0 - (beta2 as f64).powi(t);
                let step = (lr as f64 * c2.sqrt() / c1) as f32;
                let eps_hat = (eps as f64 * c2.sqrt()) as f32;
                for (b, (p, g)) in params.into_iter().zip(grads.iter_mut()).enumerate() {
                    let (m, v) = (&mut self.first[b], &mut self.second[b]);
                    let (rows, grad) = g.rows_and_grad();
                    for &r in rows {
                        let gr = grad.row(r);
                        let mr = m.row_mut(r);
                        let vr = v.row_mut(r);
                        let pr = p.row_mut(r);
                        for k in 0..gr.len() {
                            mr[k] = beta1 * mr[k] + (1.0 - beta1) * gr[k];
                            vr[k] = beta2 * vr[k] + (1.0 - beta2) * gr[k] * gr[k];
                            pr[k] -= step * mr[k] / (vr[k].sqrt() + eps_hat);
                        }
                    }
                }
            }
        }
    }
}
