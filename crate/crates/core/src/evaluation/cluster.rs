//! How tightly item embeddings cluster by category.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, DenseMatrix, SparseIncidence};

/// Pairs drawn per statistic; smaller populations are enumerated exactly.
pub const CLUSTER_PAIRS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelClusters {
    pub level: usize,
    /// Mean cosine over same-category pairs.
    pub intra: f64,
    /// Mean cosine over cross-category pairs.
    pub inter: f64,
    pub separation: f64,
    pub intra_pairs: usize,
    pub inter_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub levels: Vec<LevelClusters>,
    pub seed: u64,
}

impl ClusterReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("level\tintra\tinter\tseparation\tintra_pairs\tinter_pairs\n");
        for l in &self.levels {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                l.level, l.intra, l.inter, l.separation, l.intra_pairs, l.inter_pairs
            ));
        }
        out
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (a, b): (Vec<f64>, Vec<f64>) = (
        a.iter().map(|&x| x as f64).collect(),
        b.iter().map(|&x| x as f64).collect(),
    );
    let na = dot(&a, &a).sqrt();
    let nb = dot(&b, &b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(&a, &b) / (na * nb)).clamp(-1.0, 1.0)
}

fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let (mut total, mut n) = (0.0, 0);
    for v in values {
        total += v;
        n += 1;
    }
    (if n == 0 { 0.0 } else { total / n as f64 }, n)
}

fn level_clusters(e: &DenseMatrix, g: &SparseIncidence, level: usize, rng: &mut ChaCha8Rng) -> LevelClusters {
    let n = g.n_items();
    let pair_counts: Vec<usize> = g.categories().map(|m| m.len() * m.len().saturating_sub(1) / 2).collect();
    let n_intra: usize = pair_counts.iter().sum();
    let n_inter = n * n.saturating_sub(1) / 2 - n_intra;
    let cos = |i: usize, j: usize| cosine(e.row(i), e.row(j));

    let (intra, intra_pairs) = if n_intra < CLUSTER_PAIRS {
        mean(g.categories().flat_map(|m| {
            (0..m.len()).flat_map(move |a| (a + 1..m.len()).map(move |b| (m[a], m[b])))
        })
        .map(|(i, j)| cos(i, j)))
    } else {
        let pick = WeightedIndex::new(&pair_counts).expect("some category has a pair");
        mean((0..CLUSTER_PAIRS).map(|_| {
            let m = g.members(pick.sample(rng));
            let a = rng.random_range(0..m.len());
            let mut b = rng.random_range(0..m.len() - 1);
            if b >= a {
                b += 1;
            }
            cos(m[a], m[b])
        }))
    };
    let (inter, inter_pairs) = if n_inter == 0 {
        (0.0, 0)
    } else if n_inter < CLUSTER_PAIRS {
        mean((0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| g.category_of(i) != g.category_of(j))
            .map(|(i, j)| cos(i, j)))
    } else {
        mean((0..CLUSTER_PAIRS).map(|_| loop {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if g.category_of(i) != g.category_of(j) {
                break cos(i, j);
            }
        }))
    };
    LevelClusters {
        level,
        intra,
        inter,
        separation: intra - inter,
        intra_pairs,
        inter_pairs,
    }
}

/// Mean intra- and inter-category cosine per level (`levels[0]` is level 1).
pub fn cluster_report(embeddings: &DenseMatrix, levels: &[SparseIncidence], seed: u64) -> Result<ClusterReport> {
    if let Some(g) = levels.iter().find(|g| g.n_items() != embeddings.rows()) {
        return Err(Error::Shape(format!(
            "{} embedding rows for a hierarchy over {} items",
            embeddings.rows(),
            g.n_items()
        )));
    }
    let levels = levels
        .iter()
        .enumerate()
        .map(|(l, g)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(l as u64 + 1);
            level_clusters(embeddings, g, l + 1, &mut rng)
        })
        .collect();
    Ok(ClusterReport { levels, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_embeddings() {
        let e = DenseMatrix::from_fn(6, 3, |_, c| c as f32 + 1.0);
        let g = SparseIncidence::from_assignment(vec![0, 0, 1, 1, 2, 2], 3).unwrap();
        let r = cluster_report(&e, &[g], 0).unwrap();
        let l = &r.levels[0];
        assert!((l.intra - 1.0).abs() < 1e-12 && (l.inter - 1.0).abs() < 1e-12);
        assert!(l.separation.abs() < 1e-12);
        assert_eq!((l.intra_pairs, l.inter_pairs), (3, 12));
    }

    #[test]
    fn orthogonal_categories() {
        let e = DenseMatrix::from_fn(6, 3, |r, c| if r / 2 == c { 2.0 } else { 0.0 });
        let g = SparseIncidence::from_assignment(vec![0, 0, 1, 1, 2, 2], 3).unwrap();
        let l = &cluster_report(&e, &[g], 0).unwrap().levels[0];
        assert_eq!((l.intra, l.inter, l.separation), (1.0, 0.0, 1.0));
    }

    #[test]
    fn zero_vectors_have_zero_cosine() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }

    #[test]
    fn sampled_estimate_is_seeded_and_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = DenseMatrix::uniform(400, 4, -1.0, 1.0, &mut rng);
        let g = SparseIncidence::from_assignment((0..400).map(|i| i % 2).collect(), 2).unwrap();
        let a = cluster_report(&e, &[g.clone()], 5).unwrap();
        assert_eq!(a, cluster_report(&e, &[g], 5).unwrap());
        let l = &a.levels[0];
        assert_eq!((l.intra_pairs, l.inter_pairs), (CLUSTER_PAIRS, CLUSTER_PAIRS));
        // random directions: both means near zero
        assert!(l.intra.abs() < 0.05 && l.inter.abs() < 0.05);
    }
}
