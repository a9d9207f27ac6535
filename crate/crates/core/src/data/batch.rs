//! Stratified mini-batch sampling.
//!
//! Each epoch is a seeded permutation of the train positives, cut into batches
//! whose per-category composition follows fixed quotas: either equal counts
//! per category or counts proportional to `ln(1 + category size)`. Categories
//! that run dry hand their share to the others, so every positive lands in
//! exactly one batch per epoch.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::split::ColdStartSplit;
use crate::error::{Error, Result};
use crate::numerics::SparseIncidence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    UniformPerCategory,
    #[default]
    LogProportional,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub positives: Vec<(u32, u32)>,
    pub negatives: Vec<(u32, u32)>,
    /// Index into `positives` of the positive each negative was drawn for.
    pub negative_of: Vec<u32>,
    /// Positives per category, one histogram per hierarchy level.
    pub histograms: Vec<Vec<usize>>,
}

/// Splits `total` as evenly as possible over `n` slots; earlier slots get the
/// extra units.
pub fn uniform_quotas(n: usize, total: usize) -> Vec<usize> {
    largest_remainder(&vec![1.0; n], total)
}

/// Splits `total` proportionally to `ln(1 + size)` with largest-remainder
/// rounding.
pub fn log_proportional_quotas(sizes: &[f64], total: usize) -> Vec<usize> {
    let w: Vec<f64> = sizes.iter().map(|s| s.ln_1p()).collect();
    largest_remainder(&w, total)
}

/// Hamilton apportionment; ties in the remainder go to the lower index.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Vec::new();
    }
    if sum <= 0.0 {
        return largest_remainder(&vec![1.0; weights.len()], total);
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut q: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = q.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        q[i] += 1;
    }
    q
}

/// Quotas for `total` draws, capped by what each category has left.
fn capped_quotas(weights: &[f64], caps: &[usize], total: usize) -> Vec<usize> {
    let mut out = vec![0; weights.len()];
    let mut open: Vec<usize> = (0..weights.len()).filter(|&c| caps[c] > 0).collect();
    let mut left = total;
    while left > 0 && !open.is_empty() {
        let w: Vec<f64> = open.iter().map(|&c| weights[c]).collect();
        let q = largest_remainder(&w, left);
        let mut saturated = Vec::new();
        let mut granted = 0;
        for (k, &c) in open.iter().enumerate() {
            let take = q[k].min(caps[c] - out[c]);
            out[c] += take;
            granted += take;
            if out[c] == caps[c] {
                saturated.push(c);
            }
        }
        left -= granted;
        open.retain(|c| !saturated.contains(c));
    }
    out
}

/// Produces the batch sequence for each epoch of a split.
#[derive(Debug, Clone)]
pub struct BatchSampler<'a> {
    split: &'a ColdStartSplit,
    levels: Vec<&'a SparseIncidence>,
    /// Positive indices grouped by category at the stratification level.
    groups: Vec<Vec<usize>>,
    weights: Vec<f64>,
    batch_size: usize,
    negatives_per_positive: usize,
    seed: u64,
}

impl<'a> BatchSampler<'a> {
    /// `stratify_level` indexes `levels` (0 = finest). Without it, or without
    /// levels, batches are plain shuffled slices.
    pub fn new(
        split: &'a ColdStartSplit,
        levels: &[&'a SparseIncidence],
        stratify_level: Option<usize>,
        batch_size: usize,
        mode: SamplingMode,
        negatives_per_positive: usize,
        seed: u64,
    ) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        let pairs = split.train_pairs();
        let (groups, weights) = match stratify_level {
            Some(level) => {
                let g = levels.get(level).ok_or_else(|| {
                    Error::Config(format!(
                        "stratification level {} but only {} levels",
                        level + 1,
                        levels.len()
                    ))
                })?;
                if g.n_items() != split.n_items() {
                    return Err(Error::Shape(format!(
                        "incidence covers {} items, split has {}",
                        g.n_items(),
                        split.n_items()
                    )));
                }
                let k = g.n_categories();
                if mode == SamplingMode::UniformPerCategory && batch_size < k {
                    return Err(Error::Config(format!(
                        "batch_size {batch_size} is smaller than the {k} categories at level {}",
                        level + 1
                    )));
                }
                let mut groups = vec![Vec::new(); k];
                for (p, &(_, i)) in pairs.iter().enumerate() {
                    groups[g.category_of(i as usize)].push(p);
                }
                let weights = match mode {
                    SamplingMode::UniformPerCategory => vec![1.0; k],
                    SamplingMode::LogProportional => (0..k)
                        .map(|c| (g.members(c).len() as f64).ln_1p())
                        .collect(),
                };
                (groups, weights)
            }
            None => (vec![(0..pairs.len()).collect()], vec![1.0]),
        };
        Ok(Self {
            split,
            levels: levels.to_vec(),
            groups,
            weights,
            batch_size,
            negatives_per_positive,
            seed,
        })
    }

    pub fn n_positives(&self) -> usize {
        self.split.train_pairs().len()
    }

    /// All batches of epoch `epoch`. Deterministic in `(seed, epoch)`.
    pub fn epoch(&self, epoch: u64) -> Vec<Batch> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch.wrapping_add(1));
        let pairs = self.split.train_pairs();
        let mut pools: Vec<Vec<usize>> = self.groups.clone();
        for p in &mut pools {
            p.shuffle(&mut rng);
        }
        let mut cursor = vec![0usize; pools.len()];
        let mut remaining: usize = pools.iter().map(Vec::len).sum();
        let mut batches = Vec::new();
        while remaining > 0 {
            let caps: Vec<usize> = pools
                .iter()
                .zip(&cursor)
                .map(|(p, &c)| p.len() - c)
                .collect();
            let take = self.batch_size.min(remaining);
            let quotas = capped_quotas(&self.weights, &caps, take);
            let mut positives = Vec::with_capacity(take);
            for (c, &q) in quotas.iter().enumerate() {
                for &p in &pools[c][cursor[c]..cursor[c] + q] {
                    positives.push(pairs[p]);
                }
                cursor[c] += q;
            }
            remaining -= take;
            let (negatives, negative_of) = self.draw_negatives(&positives, &mut rng);
            let histograms = self
                .levels
                .iter()
                .map(|g| {
                    let mut h = vec![0; g.n_categories()];
                    for &(_, i) in &positives {
                        h[g.category_of(i as usize)] += 1;
                    }
                    h
                })
                .collect();
            batches.push(Batch {
                positives,
                negatives,
                negative_of,
                histograms,
            });
        }
        batches
    }

    fn draw_negatives(
        &self,
        positives: &[(u32, u32)],
        rng: &mut ChaCha8Rng,
    ) -> (Vec<(u32, u32)>, Vec<u32>) {
        let n_items = self.split.n_items();
        let mut out = Vec::with_capacity(positives.len() * self.negatives_per_positive);
        let mut owner = Vec::with_capacity(out.capacity());
        for (k, &(u, _)) in positives.iter().enumerate() {
            if self.split.seen(u as usize).len() >= n_items {
                continue;
            }
            for _ in 0..self.negatives_per_positive {
                loop {
                    let j = rng.random_range(0..n_items);
                    if !self.split.has_seen(u as usize, j) {
                        out.push((u, j as u32));
                        owner.push(k as u32);
                        break;
                    }
                }
            }
        }
        (out, owner)
    }
}
