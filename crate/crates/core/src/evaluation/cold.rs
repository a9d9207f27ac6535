//! Cold-start evaluation over a split's cold items.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{hit_rate_at_k, precision_at_k};
use crate::data::ColdStartSplit;
use crate::error::{Error, Result};
use crate::models::{recommend_topk, Model};

/// Which items compete in the ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    /// Cold items the user has not seen in train.
    #[default]
    Cold,
    /// Every item the user has not seen in train.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMetrics {
    pub k: usize,
    pub hit_rate: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub metrics: Vec<KMetrics>,
    pub n_test_users: usize,
    pub n_cold_items: usize,
    /// Users whose candidate list was shorter than the largest k.
    pub n_short_lists: usize,
    pub candidates: CandidateMode,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn at(&self, k: usize) -> Option<&KMetrics> {
        self.metrics.iter().find(|m| m.k == k)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("k\thit_rate\tprecision\n");
        for m in &self.metrics {
            out.push_str(&format!("{}\t{}\t{}\n", m.k, m.hit_rate, m.precision));
        }
        out
    }
}

/// Recommendation lists and truth sets of every evaluated user.
#[derive(Debug, Clone, PartialEq)]
pub struct Rankings {
    pub users: Vec<usize>,
    pub recommendations: Vec<Vec<usize>>,
    pub truth: Vec<BTreeSet<usize>>,
    pub n_short_lists: usize,
}

/// Ranks candidates for every user with a cold test event. Truth sets are
/// restricted to the candidates; users left without truth are skipped.
pub fn rank_users(
    model: &Model,
    split: &ColdStartSplit,
    k: usize,
    mode: CandidateMode,
) -> Result<Rankings> {
    let pool: Vec<usize> = match mode {
        CandidateMode::Cold => split.cold_indices(),
        CandidateMode::All => (0..split.n_items()).collect(),
    };
    let mut users = Vec::new();
    let mut truth = Vec::new();
    for (u, t) in split.test_truth() {
        let t: BTreeSet<usize> = t.into_iter().filter(|&i| !split.has_seen(u, i)).collect();
        if !t.is_empty() {
            users.push(u);
            truth.push(t);
        }
    }
    if users.is_empty() {
        return Err(Error::Evaluation(
            "no user has a test interaction on an unseen cold item".into(),
        ));
    }
    let tables = model.scoring_tables();
    let recommendations: Vec<(Vec<usize>, bool)> = users
        .par_iter()
        .map(|&u| match (&tables, model) {
            (Some(t), _) => {
                let top = recommend_topk(t, u, k, &pool, |i| split.has_seen(u, i));
                (top.items, top.short)
            }
            (None, Model::Random(r)) => {
                let candidates: Vec<usize> =
                    pool.iter().copied().filter(|&i| !split.has_seen(u, i)).collect();
                let items = r.recommend(u, k, &candidates);
                let short = items.len() < k;
                (items, short)
            }
            (None, _) => unreachable!("only the random baseline lacks scoring tables"),
        })
        .collect();
    let n_short_lists = recommendations.iter().filter(|r| r.1).count();
    Ok(Rankings {
        users,
        recommendations: recommendations.into_iter().map(|r| r.0).collect(),
        truth,
        n_short_lists,
    })
}

/// HR@k and PR@k for each `k` over the split's cold items.
pub fn evaluate_cold(
    model: &Model,
    split: &ColdStartSplit,
    ks: &[usize],
    mode: CandidateMode,
) -> Result<EvalReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("ks must be a nonempty list of k >= 1".into()));
    }
    let kmax = *ks.iter().max().unwrap();
    let r = rank_users(model, split, kmax, mode)?;
    let metrics = ks
        .iter()
        .map(|&k| {
            Ok(KMetrics {
                k,
                hit_rate: hit_rate_at_k(&r.recommendations, &r.truth, k)?,
                precision: precision_at_k(&r.recommendations, &r.truth, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        model: model.kind().to_string(),
        metrics,
        n_test_users: r.users.len(),
        n_cold_items: split.cold_items.len(),
        n_short_lists: r.n_short_lists,
        candidates: mode,
        seed: split.params.seed,
        config: serde_json::Value::Null,
    })
}
