//! The JSON run configuration shared by every subcommand.
//!
//! Unknown keys are rejected at every level. A single top-level `seed` feeds
//! the split, the synthetic generator and training; the per-section seeds are
//! overwritten by [`RunConfig::resolve`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{SamplingMode, SplitParams, SynthParams};
use crate::error::{Error, Result};
use crate::evaluation::{CandidateMode, TimingSpec};
use crate::models::ModelKind;
use crate::numerics::Activation;
use crate::training::{AlsParams, GridSpec, LossKind, OptimizerKind, TrainConfig};

/// File name of the resolved config written next to every output.
pub const RESOLVED_CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// CSV with header `user_id,item_id,timestamp,value`.
    pub interactions: Option<PathBuf>,
    /// CSV with header `item_id,level_1,...,level_L`.
    pub hierarchy: Option<PathBuf>,
    /// Directory written by `prepare`; takes precedence over the CSVs.
    pub prepared: Option<PathBuf>,
    /// Events with `value >= threshold` become positives.
    pub threshold: f32,
    pub k_core: usize,
    /// Categories with fewer members are merged into `__OTHER__` at every
    /// level; 0 disables merging.
    pub min_category_items: usize,
    pub skip_bad_rows: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            interactions: None,
            hierarchy: None,
            prepared: None,
            threshold: 3.0,
            k_core: 5,
            min_category_items: 0,
            skip_bad_rows: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub d: usize,
    pub h: usize,
    /// Number of hierarchy levels fed to the model, finest first.
    pub levels: Option<usize>,
    pub activation: Activation,
    pub skip: bool,
    pub masked_softmax: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            kind: ModelKind::Hge,
            d: t.d,
            h: t.h,
            levels: t.levels,
            activation: t.activation,
            skip: t.skip,
            masked_softmax: t.masked_softmax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
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
    pub stratify_level: Option<usize>,
    pub als: AlsParams,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            negatives_per_positive: t.negatives_per_positive,
            l2_user: t.l2_user,
            l2_item: t.l2_item,
            l2_layer: t.l2_layer,
            optimizer: t.optimizer,
            loss: t.loss,
            sampling_mode: t.sampling_mode,
            stratify_level: t.stratify_level,
            als: t.als,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub candidates: CandidateMode,
    /// Also write the intra/inter category cosine report.
    pub clusters: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![10, 20],
            candidates: CandidateMode::Cold,
            clusters: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub split: SplitParams,
    pub synth: SynthParams,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub eval: EvalConfig,
    pub grid: GridSpec,
    pub benchmark: TimingSpec,
}

impl RunConfig {
    /// Parses a config document; errors name the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative data paths are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.data.interactions,
            &mut cfg.data.hierarchy,
            &mut cfg.data.prepared,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Propagates the top-level seed into every section and validates.
    pub fn resolve(mut self) -> Result<Self> {
        self.split.seed = self.seed;
        self.synth.seed = self.seed;
        self.split.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train_config().validate()?;
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return Err(Error::Config("eval.ks must be a nonempty list of k >= 1".into()));
        }
        if self.benchmark.timed_epochs < 3 {
            return Err(Error::Config(format!(
                "benchmark.timed_epochs must be >= 3, got {}",
                self.benchmark.timed_epochs
            )));
        }
        Ok(self)
    }

    /// The flat training configuration of the `model` and `train` sections.
    pub fn train_config(&self) -> TrainConfig {
        let (m, t) = (&self.model, &self.train);
        TrainConfig {
            d: m.d,
            h: m.h,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            negatives_per_positive: t.negatives_per_positive,
            l2_user: t.l2_user,
            l2_item: t.l2_item,
            l2_layer: t.l2_layer,
            optimizer: t.optimizer,
            loss: t.loss,
            sampling_mode: t.sampling_mode,
            stratify_level: t.stratify_level,
            levels: m.levels,
            activation: m.activation,
            skip: m.skip,
            masked_softmax: m.masked_softmax,
            als: t.als,
            seed: self.seed,
        }
    }

    /// Copies `d` and `learning_rate` back from a tuned [`TrainConfig`].
    pub fn with_tuned(mut self, cfg: &TrainConfig) -> Self {
        self.model.d = cfg.d;
        self.train.learning_rate = cfg.learning_rate;
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Writes the resolved config as `config.json` in `dir`.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(RESOLVED_CONFIG_FILE);
        fs::write(&path, self.to_json()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
