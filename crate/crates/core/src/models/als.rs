//! Implicit-feedback alternating least squares.
//!
//! Objective over all user-item cells:
//! `sum c_ui (r_ui - x_u.y_i)^2 + lambda_x sum |x_u|^2 + lambda_y sum |y_i|^2`
//! with `r_ui = 1` and `c_ui = 1 + alpha * count_ui` on observed cells and
//! `r_ui = 0`, `c_ui = 1` elsewhere. Each half-step solves every row in
//! closed form; the dense part `Y^T Y` is shared, so a row costs
//! `O(n_u d^2 + d^3)` where `n_u` is the number of observed cells in it.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ColdStartSplit;
use crate::error::{Error, Result};
use crate::numerics::{dot, DenseMatrix, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlsConfig {
    pub d: usize,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            d: 32,
            lambda_x: 0.1,
            lambda_y: 0.1,
            alpha: 40.0,
            iterations: 15,
            seed: 0,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.iterations == 0 {
            return Err(Error::Parameter("ALS needs d >= 1 and iterations >= 1".into()));
        }
        if !(self.lambda_x >= 0.0 && self.lambda_y >= 0.0) {
            return Err(Error::Parameter("ALS regularisation must be >= 0".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!("ALS alpha must be > 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlsModel<T: Real = f32> {
    pub x: DenseMatrix<T>,
    pub y: DenseMatrix<T>,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub alpha: f64,
}

/// Observed cell `(user, item, count)`.
pub type Observation = (u32, u32, f64);

impl<T: Real> AlsModel<T> {
    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn n_users(&self) -> usize {
        self.x.rows()
    }

    pub fn n_items(&self) -> usize {
        self.y.rows()
    }

    pub fn param_count(&self) -> usize {
        (self.n_users() + self.n_items()) * self.dim()
    }

    pub fn score(&self, user: usize, item: usize) -> Result<T> {
        if user >= self.n_users() || item >= self.n_items() {
            return Err(Error::Parameter(format!(
                "pair ({user}, {item}) out of range for {} users and {} items",
                self.n_users(),
                self.n_items()
            )));
        }
        Ok(dot(self.x.row(user), self.y.row(item)))
    }

    pub fn cast<U: Real>(&self) -> AlsModel<U> {
        AlsModel {
            x: self.x.cast(),
            y: self.y.cast(),
            lambda_x: self.lambda_x,
            lambda_y: self.lambda_y,
            alpha: self.alpha,
        }
    }

    /// The ALS objective, evaluated without visiting unobserved cells.
    pub fn objective(&self, observed: &[Observation]) -> f64 {
        let x = self.x.cast::<f64>();
        let y = self.y.cast::<f64>();
        objective(&x, &y, observed, self.alpha, self.lambda_x, self.lambda_y)
    }
}

/// Sums event counts per `(user, item)` cell, sorted by cell.
pub fn observations(pairs: &[(u32, u32)]) -> Vec<Observation> {
    let mut counts: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for &p in pairs {
        *counts.entry(p).or_insert(0.0) += 1.0;
    }
    counts.into_iter().map(|((u, i), c)| (u, i, c)).collect()
}

fn gram(m: &DenseMatrix<f64>) -> DMatrix<f64> {
    let d = m.cols();
    let mut g = DMatrix::zeros(d, d);
    for r in 0..m.rows() {
        let row = m.row(r);
        for a in 0..d {
            for b in 0..d {
                g[(a, b)] += row[a] * row[b];
            }
        }
    }
    g
}

fn objective(
    x: &DenseMatrix<f64>,
    y: &DenseMatrix<f64>,
    observed: &[Observation],
    alpha: f64,
    lambda_x: f64,
    lambda_y: f64,
) -> f64 {
    // sum over all cells of p^2 = tr(X^T X Y^T Y); observed cells then swap
    // their p^2 for c (1 - p)^2.
    let gx = gram(x);
    let gy = gram(y);
    let mut total = gx.component_mul(&gy).sum();
    for &(u, i, count) in observed {
        let p = dot(x.row(u as usize), y.row(i as usize));
        let c = 1.0 + alpha * count;
        total += c * (1.0 - p) * (1.0 - p) - p * p;
    }
    let sq = |m: &DenseMatrix<f64>| m.as_slice().iter().map(|v| v * v).sum::<f64>();
    total + lambda_x * sq(x) + lambda_y * sq(y)
}

/// Solves every row of `target` against the fixed `other` factor.
/// `rows[r]` lists `(column, count)` of the observed cells of row `r`.
fn half_step(
    target: &mut DenseMatrix<f64>,
    other: &DenseMatrix<f64>,
    rows: &[Vec<(usize, f64)>],
    alpha: f64,
    lambda: f64,
    what: &str,
) -> Result<()> {
    let d = other.cols();
    let base = gram(other) + DMatrix::identity(d, d) * lambda;
    let solved: Vec<Result<Vec<f64>>> = rows
        .par_iter()
        .enumerate()
        .map(|(r, obs)| {
            let mut a = base.clone();
            let mut b = DVector::zeros(d);
            for &(j, count) in obs {
                let yj = other.row(j);
                let c = 1.0 + alpha * count;
                for p in 0..d {
                    b[p] += c * yj[p];
                    for q in 0..d {
                        a[(p, q)] += (c - 1.0) * yj[p] * yj[q];
                    }
                }
            }
            let chol = a.cholesky().ok_or_else(|| {
                Error::Numerical(format!(
                    "ALS normal equations for {what} {r} are singular; use a positive lambda"
                ))
            })?;
            let sol = chol.solve(&b);
            if sol.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("ALS solve for {what} {r} is not finite")));
            }
            Ok(sol.iter().copied().collect())
        })
        .collect();
    for (r, sol) in solved.into_iter().enumerate() {
        target.row_mut(r).copy_from_slice(&sol?);
    }
    Ok(())
}

/// Fits on explicit observations in double precision. Returns the model and
/// the objective after every half-step (`2 * iterations` values).
pub fn als_fit_observations(
    n_users: usize,
    n_items: usize,
    observed: &[Observation],
    cfg: &AlsConfig,
) -> Result<(AlsModel<f64>, Vec<f64>)> {
    cfg.validate()?;
    let mut by_user = vec![Vec::new(); n_users];
    let mut by_item = vec![Vec::new(); n_items];
    for &(u, i, c) in observed {
        if u as usize >= n_users || i as usize >= n_items {
            return Err(Error::Data(format!(
                "observation ({u}, {i}) out of range for {n_users} users and {n_items} items"
            )));
        }
        by_user[u as usize].push((i as usize, c));
        by_item[i as usize].push((u as usize, c));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = DenseMatrix::uniform(n_users, cfg.d, -0.01, 0.01, &mut rng);
    let mut y = DenseMatrix::uniform(n_items, cfg.d, -0.01, 0.01, &mut rng);
    let mut history = Vec::with_capacity(2 * cfg.iterations);
    for it in 0..cfg.iterations {
        half_step(&mut x, &y, &by_user, cfg.alpha, cfg.lambda_x, "user")?;
        history.push(objective(&x, &y, observed, cfg.alpha, cfg.lambda_x, cfg.lambda_y));
        half_step(&mut y, &x, &by_item, cfg.alpha, cfg.lambda_y, "item")?;
        history.push(objective(&x, &y, observed, cfg.alpha, cfg.lambda_x, cfg.lambda_y));
        log::debug!("als iteration {}: objective {:.6e}", it + 1, history.last().unwrap());
    }
    let model = AlsModel {
        x,
        y,
        lambda_x: cfg.lambda_x,
        lambda_y: cfg.lambda_y,
        alpha: cfg.alpha,
    };
    Ok((model, history))
}

/// Fits on the split's train events; repeated events raise the confidence.
pub fn als_fit(split: &ColdStartSplit, cfg: &AlsConfig) -> Result<(AlsModel, Vec<f64>)> {
    let observed = observations(split.train_pairs());
    let (model, history) = als_fit_observations(split.n_users(), split.n_items(), &observed, cfg)?;
    Ok((model.cast(), history))
}
