//! Recommendation models: random baseline, MF, implicit ALS, hybrid MF and HGE.

pub mod als;
pub mod grad;
pub mod hge;
pub mod hybrid;
pub mod mf;
pub mod random;
pub mod topk;

use serde::{Deserialize, Serialize};

pub use als::{als_fit, als_fit_observations, observations, AlsConfig, AlsModel};
pub use grad::{GradBlock, GradientModel};
pub use hge::{hge_backward, HgeForward, HgeGradients, HgeLayer, HgeModel, LayerCache, LayerOptions};
pub use hybrid::{hybrid_score, item_features, HybridMfModel};
pub use mf::{mf_score, MfModel};
pub use random::{random_recommend, RandomModel};
pub use topk::{recommend_topk, top_k_by_score, Scorer, TopK};

use crate::numerics::{dot, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Random,
    Mf,
    Als,
    HybridMf,
    Hge,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Mf => "mf",
            Self::Als => "als",
            Self::HybridMf => "hybrid_mf",
            Self::Hge => "hge",
        }
    }

    pub fn needs_hierarchy(self) -> bool {
        matches!(self, Self::HybridMf | Self::Hge)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Any trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Random(RandomModel),
    Mf(MfModel),
    Als(AlsModel),
    HybridMf(HybridMfModel),
    Hge(HgeModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Random(_) => ModelKind::Random,
            Self::Mf(_) => ModelKind::Mf,
            Self::Als(_) => ModelKind::Als,
            Self::HybridMf(_) => ModelKind::HybridMf,
            Self::Hge(_) => ModelKind::Hge,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Self::Random(_) => 0,
            Self::Mf(m) => m.param_count(),
            Self::Als(m) => m.param_count(),
            Self::HybridMf(m) => m.param_count(),
            Self::Hge(m) => m.param_count(),
        }
    }

    /// Item vectors the model scores with; `None` for the random baseline.
    pub fn item_embeddings(&self) -> Option<DenseMatrix> {
        match self {
            Self::Random(_) => None,
            Self::Mf(m) => Some(m.item_embeddings.clone()),
            Self::Als(m) => Some(m.y.clone()),
            Self::HybridMf(m) => Some(m.effective_item_embeddings()),
            Self::Hge(m) => Some(m.item_embeddings()),
        }
    }

    /// Precomputed tables for fast scoring; `None` for the random baseline.
    pub fn scoring_tables(&self) -> Option<ScoringTables> {
        let items = self.item_embeddings()?;
        let (users, user_bias, item_bias) = match self {
            Self::Random(_) => unreachable!(),
            Self::Mf(m) => (m.user_embeddings.clone(), None, None),
            Self::Als(m) => (m.x.clone(), None, None),
            Self::HybridMf(m) => (
                m.user_embeddings.clone(),
                Some(m.user_bias.as_slice().to_vec()),
                Some(m.item_bias.as_slice().to_vec()),
            ),
            Self::Hge(m) => (m.base.user_embeddings.clone(), None, None),
        };
        Some(ScoringTables {
            users,
            items,
            user_bias,
            item_bias,
        })
    }
}

/// Final user and item vectors plus optional biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringTables {
    pub users: DenseMatrix,
    pub items: DenseMatrix,
    pub user_bias: Option<Vec<f32>>,
    pub item_bias: Option<Vec<f32>>,
}

impl Scorer for ScoringTables {
    fn score(&self, user: usize, item: usize) -> f32 {
        let mut s = dot(self.users.row(user), self.items.row(item));
        if let Some(b) = &self.user_bias {
            s += b[user];
        }
        if let Some(b) = &self.item_bias {
            s += b[item];
        }
        s
    }
}
