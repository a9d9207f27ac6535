//! Synthetic interaction logs with a planted item hierarchy.
//!
//! A balanced category tree is grown from the coarsest level down. Every
//! top-level category gets a Gaussian latent vector; each child perturbs its
//! parent's vector with a spread that shrinks with depth, and each item
//! perturbs its leaf's vector by `noise`. Users draw their items without
//! replacement with probability proportional to `exp(sharpness * <user, item>)`,
//! so items that share a category are genuinely co-preferred.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::hierarchy::Hierarchy;
use super::log::{Interaction, InteractionLog};
use super::split::SECONDS_PER_DAY;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub n_users: usize,
    pub n_items: usize,
    pub n_levels: usize,
    /// Children per node, coarsest level first. Length must be `n_levels`.
    pub branching: Vec<usize>,
    pub d_true: usize,
    /// Item-level perturbation around its leaf category.
    pub noise: f64,
    /// Category perturbation scale; depth `k` below the top uses `spread^k`.
    pub spread: f64,
    /// Inverse temperature of the preference softmax.
    pub sharpness: f64,
    pub interactions_per_user: usize,
    pub span_days: u64,
    pub start_timestamp: u64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_users: 2000,
            n_items: 1000,
            n_levels: 2,
            branching: vec![5, 4],
            d_true: 8,
            noise: 0.3,
            spread: 0.8,
            sharpness: 1.0,
            interactions_per_user: 20,
            span_days: 120,
            start_timestamp: 1_600_000_000,
            seed: 0,
        }
    }
}

/// Generated data together with the latent vectors behind it.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub log: InteractionLog,
    pub hierarchy: Hierarchy,
    pub item_latents: Vec<Vec<f64>>,
    pub user_latents: Vec<Vec<f64>>,
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("n_users", self.n_users),
            ("n_items", self.n_items),
            ("n_levels", self.n_levels),
            ("d_true", self.d_true),
            ("interactions_per_user", self.interactions_per_user),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Parameter(format!("{name} must be positive")));
        }
        if self.branching.len() != self.n_levels || self.branching.contains(&0) {
            return Err(Error::Parameter(format!(
                "branching must list {} positive entries, got {:?}",
                self.n_levels, self.branching
            )));
        }
        if self.interactions_per_user > self.n_items {
            return Err(Error::Parameter(format!(
                "interactions_per_user {} exceeds n_items {}",
                self.interactions_per_user, self.n_items
            )));
        }
        if self.span_days == 0 || self.noise < 0.0 || self.spread < 0.0 {
            return Err(Error::Parameter("span_days, noise and spread must be positive".into()));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect::<Vec<f64>>()
}

/// Generates `(log, hierarchy)`; see [`synth_generate_full`] for latents.
pub fn synth_generate(params: &SynthParams) -> Result<(InteractionLog, Hierarchy)> {
    let data = synth_generate_full(params)?;
    Ok((data.log, data.hierarchy))
}

pub fn synth_generate_full(params: &SynthParams) -> Result<SynthData> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let d = params.d_true;

    // nodes[depth] holds (label, latent) for every node at that depth
    let mut nodes: Vec<Vec<(String, Vec<f64>)>> = Vec::new();
    let top: Vec<_> = (0..params.branching[0])
        .map(|c| (format!("c{c}"), gaussian(&mut rng, d, 1.0)))
        .collect();
    nodes.push(top);
    for depth in 1..params.n_levels {
        let scale = params.spread.powi(depth as i32);
        let mut level = Vec::new();
        for (label, v) in &nodes[depth - 1] {
            for k in 0..params.branching[depth] {
                let delta = gaussian(&mut rng, d, scale);
                let latent = v.iter().zip(&delta).map(|(a, b)| a + b).collect();
                level.push((format!("{label}.{k}"), latent));
            }
        }
        nodes.push(level);
    }
    let leaves = nodes.last().unwrap();
    let n_leaves = leaves.len();

    let item_ids: Vec<String> = (0..params.n_items).map(|i| format!("item{i:05}")).collect();
    let mut item_latents = Vec::with_capacity(params.n_items);
    // hierarchy levels are stored finest first
    let mut levels = vec![BTreeMap::new(); params.n_levels];
    for (i, id) in item_ids.iter().enumerate() {
        let leaf = i % n_leaves;
        let (_, base) = &leaves[leaf];
        let delta = gaussian(&mut rng, d, params.noise);
        item_latents.push(base.iter().zip(&delta).map(|(a, b)| a + b).collect::<Vec<_>>());
        let mut node = leaf;
        for depth in (0..params.n_levels).rev() {
            let level = params.n_levels - depth;
            levels[level - 1].insert(id.clone(), nodes[depth][node].0.clone());
            if depth > 0 {
                node /= params.branching[depth];
            }
        }
    }

    let user_latents: Vec<Vec<f64>> = (0..params.n_users)
        .map(|_| gaussian(&mut rng, d, 1.0 / (d as f64).sqrt()))
        .collect();
    let span = params.span_days * SECONDS_PER_DAY;
    let mut events = Vec::with_capacity(params.n_users * params.interactions_per_user);
    let mut keys: Vec<(f64, usize)> = Vec::with_capacity(params.n_items);
    for (u, uv) in user_latents.iter().enumerate() {
        // Gumbel top-k samples without replacement from the softmax
        keys.clear();
        for (i, iv) in item_latents.iter().enumerate() {
            let s: f64 = uv.iter().zip(iv).map(|(a, b)| a * b).sum();
            let g: f64 = -(-rng.random::<f64>().max(1e-300).ln()).ln();
            keys.push((params.sharpness * s + g, i));
        }
        keys.select_nth_unstable_by(params.interactions_per_user - 1, |a, b| {
            b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
        });
        let mut chosen: Vec<usize> = keys[..params.interactions_per_user]
            .iter()
            .map(|&(_, i)| i)
            .collect();
        chosen.sort_unstable();
        for i in chosen {
            let ts = params.start_timestamp + rng.random_range(0..span);
            events.push(Interaction::new(format!("user{u:05}"), item_ids[i].clone(), ts, 1.0));
        }
    }

    Ok(SynthData {
        log: InteractionLog::new(events),
        hierarchy: Hierarchy::new(levels),
        item_latents,
        user_latents,
    })
}
