//! ALS toys and an independent gradient-descent oracle on the same objective.

use hge::models::AlsConfig;
use hge::numerics::DenseMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Toy count matrices (0 = unobserved).
pub fn toys() -> Vec<Vec<Vec<f64>>> {
    vec![
        vec![
            vec![1.0, 1.0, 0.0, 0.0, 0.0],
            vec![1.0, 2.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0, 0.0],
            vec![0.0, 0.0, 3.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0, 1.0],
        ],
        vec![
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0],
        ],
        vec![
            vec![2.0, 1.0, 1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 1.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 1.0, 1.0],
            vec![0.0, 0.0, 0.0, 1.0, 4.0],
        ],
    ]
}

pub fn observed(m: &[Vec<f64>]) -> Vec<(u32, u32, f64)> {
    let mut out = Vec::new();
    for (u, row) in m.iter().enumerate() {
        for (i, &c) in row.iter().enumerate() {
            if c > 0.0 {
                out.push((u as u32, i as u32, c));
            }
        }
    }
    out
}

/// Explicit objective and gradient over every cell.
fn loss_and_grad(
    counts: &[Vec<f64>],
    x: &DenseMatrix<f64>,
    y: &DenseMatrix<f64>,
    cfg: &AlsConfig,
) -> (f64, DenseMatrix<f64>, DenseMatrix<f64>) {
    let mut loss = 0.0;
    let mut gx = x.map(|v| 2.0 * cfg.lambda_x * v);
    let mut gy = y.map(|v| 2.0 * cfg.lambda_y * v);
    for u in 0..x.rows() {
        for i in 0..y.rows() {
            let p: f64 = (0..x.cols()).map(|k| x.get(u, k) * y.get(i, k)).sum();
            let (r, c) = if counts[u][i] > 0.0 { (1.0, 1.0 + cfg.alpha * counts[u][i]) } else { (0.0, 1.0) };
            loss += c * (r - p) * (r - p);
            let g = -2.0 * c * (r - p);
            for k in 0..x.cols() {
                gx.set(u, k, gx.get(u, k) + g * y.get(i, k));
                gy.set(i, k, gy.get(i, k) + g * x.get(u, k));
            }
        }
    }
    loss += cfg.lambda_x * x.as_slice().iter().map(|v| v * v).sum::<f64>();
    loss += cfg.lambda_y * y.as_slice().iter().map(|v| v * v).sum::<f64>();
    (loss, gx, gy)
}

/// Gradient descent with backtracking line search.
pub fn gd_minimum(counts: &[Vec<f64>], cfg: &AlsConfig, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = counts.len();
    let mut x = DenseMatrix::uniform(n, cfg.d, -0.5, 0.5, &mut rng);
    let mut y = DenseMatrix::uniform(n, cfg.d, -0.5, 0.5, &mut rng);
    let mut step = 1e-2;
    let (mut loss, mut gx, mut gy) = loss_and_grad(counts, &x, &y, cfg);
    for _ in 0..20_000 {
        let norm2: f64 = gx.as_slice().iter().chain(gy.as_slice()).map(|v| v * v).sum();
        if norm2 < 1e-20 {
            break;
        }
        loop {
            let nx = DenseMatrix::from_fn(n, cfg.d, |r, c| x.get(r, c) - step * gx.get(r, c));
            let ny = DenseMatrix::from_fn(n, cfg.d, |r, c| y.get(r, c) - step * gy.get(r, c));
            let (nl, ngx, ngy) = loss_and_grad(counts, &nx, &ny, cfg);
            if nl <= loss - 0.5 * step * norm2 {
                (x, y, loss, gx, gy) = (nx, ny, nl, ngx, ngy);
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                return loss;
            }
        }
    }
    loss
}

pub fn config() -> AlsConfig {
    AlsConfig {
        d: 2,
        lambda_x: 0.1,
        lambda_y: 0.1,
        alpha: 2.0,
        iterations: 20,
        seed: 7,
    }
}
