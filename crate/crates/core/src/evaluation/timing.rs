//! Per-epoch wall-clock comparison of two gradient-trained models.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::ColdStartSplit;
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::numerics::SparseIncidence;
use crate::training::{init_model, new_sampler, ModelTrainer, OptimizerKind, TrainConfig};

/// Settings of the MF-vs-HGE benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingSpec {
    pub dims: Vec<usize>,
    pub timed_epochs: usize,
    /// Overrides the training batch size; HGE needs large batches to see
    /// several items per category.
    pub batch_size: Option<usize>,
}

impl Default for TimingSpec {
    fn default() -> Self {
        Self {
            dims: (1..=10).map(|i| 20 * i).collect(),
            timed_epochs: 21,
            batch_size: Some(2048),
        }
    }
}

impl TimingSpec {
    /// Runs [`timing_benchmark`] with these settings on top of `base`.
    pub fn run(
        &self,
        split: &ColdStartSplit,
        levels: &[SparseIncidence],
        base: &TrainConfig,
    ) -> Result<TimingReport> {
        let cfg = TrainConfig {
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            ..*base
        };
        timing_benchmark(split, levels, &self.dims, &cfg, self.timed_epochs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub d: usize,
    pub baseline_epoch_seconds: f64,
    pub candidate_epoch_seconds: f64,
    /// Median over timed epochs of `candidate / baseline`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub baseline: String,
    pub candidate: String,
    pub rows: Vec<TimingRow>,
    pub warmup_epochs: usize,
    pub timed_epochs: usize,
    pub batches_per_epoch: usize,
    pub hardware: String,
}

impl TimingReport {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "d\t{}_epoch_seconds\t{}_epoch_seconds\tratio\n",
            self.baseline, self.candidate
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.d, r.baseline_epoch_seconds, r.candidate_epoch_seconds, r.ratio
            ));
        }
        out
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn hardware() -> String {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{}-{}, {threads} hardware threads",
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

/// Trains `baseline` and `candidate` side by side on identical batches with
/// plain SGD: one warm-up epoch, then `timed_epochs` epochs whose order
/// alternates between the two models. Reports the median epoch time per `d`
/// and the median of the per-epoch paired ratios.
pub fn compare_epoch_times(
    split: &ColdStartSplit,
    levels: &[SparseIncidence],
    dims: &[usize],
    base: &TrainConfig,
    timed_epochs: usize,
    baseline: ModelKind,
    candidate: ModelKind,
) -> Result<TimingReport> {
    if timed_epochs < 3 {
        return Err(Error::Config(format!(
            "timing needs at least 3 timed epochs, got {timed_epochs}"
        )));
    }
    let mut rows = Vec::with_capacity(dims.len());
    let mut batches_per_epoch = 0;
    for &d in dims {
        let cfg = TrainConfig {
            d,
            optimizer: OptimizerKind::Sgd,
            ..*base
        };
        cfg.validate()?;
        let used = cfg.used_levels(levels);
        let sampler = new_sampler(split, used, &cfg)?;
        let epochs: Vec<_> = (0..=timed_epochs as u64).map(|e| sampler.epoch(e)).collect();
        batches_per_epoch = epochs[0].len();
        let mut a = init_model(baseline, split.n_users(), split.n_items(), levels, &cfg)?;
        let mut b = init_model(candidate, split.n_users(), split.n_items(), levels, &cfg)?;
        let mut ta = ModelTrainer::new(&mut a, &cfg)?;
        let mut tb = ModelTrainer::new(&mut b, &cfg)?;
        ta.epoch(&epochs[0])?;
        tb.epoch(&epochs[0])?;
        let (mut sa, mut sb) = (Vec::new(), Vec::new());
        for (e, batches) in epochs.iter().enumerate().skip(1) {
            let run = |t: &mut ModelTrainer<'_>, out: &mut Vec<f64>| -> Result<()> {
                let start = Instant::now();
                t.epoch(batches)?;
                out.push(start.elapsed().as_secs_f64());
                Ok(())
            };
            if e % 2 == 1 {
                run(&mut ta, &mut sa)?;
                run(&mut tb, &mut sb)?;
            } else {
                run(&mut tb, &mut sb)?;
                run(&mut ta, &mut sa)?;
            }
        }
        let ratio = median(sa.iter().zip(&sb).map(|(a, b)| b / a).collect());
        let (ma, mb) = (median(sa), median(sb));
        log::info!("timing d={d}: {baseline} {ma:.4}s, {candidate} {mb:.4}s");
        rows.push(TimingRow {
            d,
            baseline_epoch_seconds: ma,
            candidate_epoch_seconds: mb,
            ratio,
        });
    }
    Ok(TimingReport {
        baseline: baseline.to_string(),
        candidate: candidate.to_string(),
        rows,
        warmup_epochs: 1,
        timed_epochs,
        batches_per_epoch,
        hardware: hardware(),
    })
}

/// MF against HGE.
pub fn timing_benchmark(
    split: &ColdStartSplit,
    levels: &[SparseIncidence],
    dims: &[usize],
    base: &TrainConfig,
    timed_epochs: usize,
) -> Result<TimingReport> {
    compare_epoch_times(split, levels, dims, base, timed_epochs, ModelKind::Mf, ModelKind::Hge)
}
