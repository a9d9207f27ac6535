//! Gradient-descent training for MF, hybrid MF and HGE; ALS and the random
//! baseline are dispatched to their own fitters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{bce_with_logits, bpr, LossKind};
use super::optim::{Optimizer, OptimizerKind};
use crate::data::{Batch, BatchSampler, ColdStartSplit, SamplingMode};
use crate::error::{Error, Result};
use crate::models::{
    als_fit, AlsConfig, GradBlock, GradientModel, HgeModel, HybridMfModel, LayerOptions, MfModel,
    Model, ModelKind, RandomModel,
};
use crate::numerics::{Activation, SparseIncidence};

/// ALS settings that have no gradient-descent counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlsParams {
    pub alpha: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub iterations: usize,
}

impl Default for AlsParams {
    fn default() -> Self {
        let d = AlsConfig::default();
        Self {
            alpha: d.alpha,
            lambda_x: d.lambda_x,
            lambda_y: d.lambda_y,
            iterations: d.iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Embedding size.
    pub d: usize,
    /// Hidden size of the HGE keys.
    pub h: usize,
    pub learning_rate: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub negatives_per_positive: usize,
    pub l2_user: f32,
    pub l2_item: f32,
    pub l2_layer: f32,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    pub sampling_mode: SamplingMode,
    /// 1-based level whose categories shape the batches; `None` shuffles
    /// plainly.
    pub stratify_level: Option<usize>,
    /// How many hierarchy levels the model uses, finest first; `None` = all.
    pub levels: Option<usize>,
    pub activation: Activation,
    pub skip: bool,
    pub masked_softmax: bool,
    pub als: AlsParams,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d: 32,
            h: 8,
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 1024,
            negatives_per_positive: 4,
            l2_user: 1e-4,
            l2_item: 1e-4,
            l2_layer: 1e-4,
            optimizer: OptimizerKind::default(),
            loss: LossKind::default(),
            sampling_mode: SamplingMode::default(),
            stratify_level: Some(1),
            levels: None,
            activation: Activation::Relu,
            skip: true,
            masked_softmax: true,
            als: AlsParams::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be a finite value >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.d == 0 || self.h == 0 {
            return Err(Error::Config("d and h must be >= 1".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        for (name, v) in [
            ("l2_user", self.l2_user),
            ("l2_item", self.l2_item),
            ("l2_layer", self.l2_layer),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.loss == LossKind::Bpr && self.negatives_per_positive == 0 {
            return Err(Error::Config("bpr loss needs negatives_per_positive >= 1".into()));
        }
        if self.stratify_level == Some(0) || self.levels == Some(0) {
            return Err(Error::Config("levels are 1-based".into()));
        }
        self.activation
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.optimizer.validate()
    }

    pub fn layer_options(&self) -> LayerOptions {
        LayerOptions {
            activation: self.activation,
            skip: self.skip,
            masked_softmax: self.masked_softmax,
        }
    }

    pub fn als_config(&self) -> AlsConfig {
        AlsConfig {
            d: self.d,
            lambda_x: self.als.lambda_x,
            lambda_y: self.als.lambda_y,
            alpha: self.als.alpha,
            iterations: self.als.iterations,
            seed: self.seed,
        }
    }

    pub(crate) fn used_levels<'a>(&self, levels: &'a [SparseIncidence]) -> &'a [SparseIncidence] {
        let n = self.levels.unwrap_or(levels.len()).min(levels.len());
        &levels[..n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    pub model: Model,
    /// Mean loss per epoch (ALS: objective after each full alternation).
    pub loss_history: Vec<f64>,
}

/// Seed of the batch stream, kept apart from the initialisation stream.
pub(crate) fn sampler_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_ba7c_4e55_0001
}
/// Batch sampler configured from `cfg` over `levels`.

pub fn new_sampler<'a>(
    split: &'a ColdStartSplit,
    levels: &'a [SparseIncidence],
    cfg: &TrainConfig,
) -> Result<BatchSampler<'a>> {
    let refs: Vec<&SparseIncidence> = levels.iter().collect();
    let stratify = match cfg.stratify_level {
        Some(l) if !levels.is_empty() => {
            if l > levels.len() {
                return Err(Error::Config(format!(
                    "stratify_level {l} but the hierarchy has {} levels",
                    levels.len()
                )));
            }
            Some(l - 1)
        }
        _ => None,
    };
    BatchSampler::new(
        split,
        &refs,
        stratify,
        cfg.batch_size,
        cfg.sampling_mode,
        cfg.negatives_per_positive,
        sampler_seed(cfg.seed),
    )
}

/// Randomly initialised model of `kind`, before any training.
pub fn init_model(
    kind: ModelKind,
    n_users: usize,
    n_items: usize,
    levels: &[SparseIncidence],
    cfg: &TrainConfig,
) -> Result<Model> {
    let levels = cfg.used_levels(levels);
    if kind.needs_hierarchy() && levels.is_empty() {
        return Err(Error::Config(format!("model `{kind}` needs a hierarchy")));
    }
    if let Some(g) = levels.iter().find(|g| g.n_items() != n_items) {
        return Err(Error::Shape(format!(
            "hierarchy covers {} items, the split has {n_items}",
            g.n_items()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(match kind {
        ModelKind::Random => Model::Random(RandomModel { seed: cfg.seed }),
        ModelKind::Mf | ModelKind::Als => Model::Mf(MfModel::random(n_users, n_items, cfg.d, &mut rng)),
        ModelKind::HybridMf => {
            Model::HybridMf(HybridMfModel::random(n_users, cfg.d, levels, &mut rng)?)
        }
        ModelKind::Hge => {
            let opts = vec![cfg.layer_options(); levels.len()];
            Model::Hge(HgeModel::random(
                n_users, n_items, cfg.d, cfg.h, levels, &opts, &mut rng,
            )?)
        }
    })
}

/// Per-block L2 weights in [`GradientModel::blocks`] order.
fn l2_weights(model: &Model, cfg: &TrainConfig) -> Vec<f32> {
    match model {
        Model::Mf(_) => vec![cfg.l2_user, cfg.l2_item],
        Model::HybridMf(_) => vec![cfg.l2_user, cfg.l2_item, cfg.l2_item, 0.0, 0.0],
        Model::Hge(m) => {
            let mut w = vec![cfg.l2_user, cfg.l2_item];
            w.extend(std::iter::repeat_n(cfg.l2_layer, 2 * m.layers.len()));
            w
        }
        Model::Random(_) | Model::Als(_) => Vec::new(),
    }
}

/// Trainer state for one gradient model: optimizer, gradient buffers and
/// per-block L2 weights.
pub struct Trainer<'m, M: GradientModel<f32>> {
    pub model: &'m mut M,
    optimizer: Optimizer,
    grads: Vec<GradBlock>,
    l2: Vec<f32>,
    learning_rate: f32,
    loss: LossKind,
}

impl<'m, M: GradientModel<f32>> Trainer<'m, M> {
    pub fn new(model: &'m mut M, optimizer: OptimizerKind, l2: Vec<f32>, learning_rate: f32, loss: LossKind) -> Self {
        let opt = Optimizer::new(optimizer, &model.blocks());
        let grads = model.new_grads();
        Self {
            model,
            optimizer: opt,
            grads,
            l2,
            learning_rate,
            loss,
        }
    }

    /// One optimizer step on `batch`; returns the batch objective
    /// (data loss plus the L2 terms of the touched rows).
    pub fn step(&mut self, batch: &Batch) -> Result<f64> {
        let n_pos = batch.positives.len();
        let mut pairs = Vec::with_capacity(n_pos + batch.negatives.len());
        pairs.extend_from_slice(&batch.positives);
        pairs.extend_from_slice(&batch.negatives);
        let (scores, cache) = self.model.forward_batch(&pairs);
        let (loss, dscores) = match self.loss {
            LossKind::Bce => {
                let mut labels = vec![0.0f32; pairs.len()];
                labels[..n_pos].iter_mut().for_each(|y| *y = 1.0);
                bce_with_logits(&scores, &labels)
            }
            LossKind::Bpr => {
                let links: Vec<(usize, usize)> = batch
                    .negative_of
                    .iter()
                    .enumerate()
                    .map(|(q, &p)| (p as usize, q))
                    .collect();
                let (l, dp, dn) = bpr(&scores[..n_pos], &scores[n_pos..], &links);
                (l, [dp, dn].concat())
            }
        };
        self.model
            .backward_batch(&cache, &pairs, &dscores, &mut self.grads);
        let mut reg = 0.0f64;
        let blocks = self.model.blocks();
        for ((g, p), &l2) in self.grads.iter_mut().zip(&blocks).zip(&self.l2) {
            if l2 == 0.0 {
                continue;
            }
            let rows = g.touched().to_vec();
            for r in rows {
                let theta = p.row(r);
                reg += 0.5 * l2 as f64 * theta.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>();
                g.add_row(r, l2, theta);
            }
        }
        let total = loss as f64 + reg;
        if !total.is_finite() {
            return Err(self.diverged());
        }
        self.optimizer
            .step(self.model.blocks_mut(), &mut self.grads, self.learning_rate);
        self.grads.iter_mut().for_each(GradBlock::clear);
        Ok(total)
    }

    /// Runs every batch once; returns the mean batch objective.
    pub fn epoch(&mut self, batches: &[Batch]) -> Result<f64> {
        let mut total = 0.0;
        for b in batches {
            total += self.step(b)?;
        }
        if self.model.blocks().iter().any(|b| !b.is_finite()) {
            return Err(self.diverged());
        }
        Ok(total / batches.len().max(1) as f64)
    }

    fn diverged(&self) -> Error {
        Error::Numerical(format!(
            "training diverged (non-finite loss); learning_rate {} is likely too large",
            self.learning_rate
        ))
    }
}

/// A [`Trainer`] for whichever gradient model a [`Model`] holds.
pub enum ModelTrainer<'m> {
    Mf(Trainer<'m, MfModel>),
    HybridMf(Trainer<'m, HybridMfModel>),
    Hge(Trainer<'m, HgeModel>),
}

impl<'m> ModelTrainer<'m> {
    pub fn new(model: &'m mut Model, cfg: &TrainConfig) -> Result<Self> {
        let l2 = l2_weights(model, cfg);
        let (opt, lr, loss) = (cfg.optimizer, cfg.learning_rate, cfg.loss);
        Ok(match model {
            Model::Mf(m) => Self::Mf(Trainer::new(m, opt, l2, lr, loss)),
            Model::HybridMf(m) => Self::HybridMf(Trainer::new(m, opt, l2, lr, loss)),
            Model::Hge(m) => Self::Hge(Trainer::new(m, opt, l2, lr, loss)),
            other => {
                return Err(Error::Config(format!(
                    "model `{}` is not trained by gradient descent",
                    other.kind()
                )))
            }
        })
    }

    pub fn epoch(&mut self, batches: &[Batch]) -> Result<f64> {
        match self {
            Self::Mf(t) => t.epoch(batches),
            Self::HybridMf(t) => t.epoch(batches),
            Self::Hge(t) => t.epoch(batches),
        }
    }
}

/// Trains a model of `kind` on the split's train events. `levels` holds
/// the incidences of the hierarchy over the split's item index, finest first;
/// it may be empty for models that do not use it.
pub fn fit(
    kind: ModelKind,
    split: &ColdStartSplit,
    levels: &[SparseIncidence],
    cfg: &TrainConfig,
) -> Result<FitOutput> {
    cfg.validate()?;
    if kind == ModelKind::Als {
        let (model, objective) = als_fit(split, &cfg.als_config())?;
        return Ok(FitOutput {
            model: Model::Als(model),
            loss_history: objective.chunks(2).map(|c| c[1]).collect(),
        });
    }
    let mut model = init_model(kind, split.n_users(), split.n_items(), levels, cfg)?;
    let used = cfg.used_levels(levels);
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    if kind != ModelKind::Random {
        let sampler = new_sampler(split, used, cfg)?;
        let mut trainer = ModelTrainer::new(&mut model, cfg)?;
        for epoch in 0..cfg.epochs {
            let batches = sampler.epoch(epoch as u64);
            let loss = trainer.epoch(&batches)?;
            log::info!("{kind} epoch {}/{}: loss {loss:.6}", epoch + 1, cfg.epochs);
            loss_history.push(loss);
        }
    }
    Ok(FitOutput {
        model,
        loss_history,
    })
}
